#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "megae/graph.hpp"
#include "megae/wavelet_frame.hpp"

namespace megae {

struct ModelShape {
    int channels = 9;  // M
    int d_in = 1;      // feature columns
    int h1 = 16;
    int h2 = 16;
    int h3 = 16;

    bool operator==(const ModelShape&) const = default;
};

/// Per-channel encoder/decoder weights plus the shared aggregation head.
/// Also used as the container for gradients.
struct ModelParams {
    std::vector<Matrix> w0;  // d_in x h1, per channel
    std::vector<Matrix> w1;  // h1 x h2
    std::vector<Matrix> w2;  // h2 x h3
    Matrix w3;               // (M*h3) x d_in
    double slope = 0.2;      // leaky-ReLU negative slope

    static ModelParams zeros(const ModelShape& shape, double slope = 0.2);
    /// Uniform fan-average initialization, limit sqrt(6/(fan_in+fan_out)).
    static ModelParams initialize(const ModelShape& shape, std::uint64_t seed, double slope = 0.2);

    ModelShape shape() const;
    int channels() const { return static_cast<int>(w0.size()); }

    /// Visits every weight tensor in declaration order: W0_1..W0_M, W1_*, W2_*, W3.
    void for_each(const std::function<void(Matrix&)>& fn);
    void for_each(const std::function<void(const Matrix&)>& fn) const;
    std::size_t parameter_count() const;
    bool all_finite() const;

    /// Throws ConfigError unless shapes are mutually consistent.
    void validate() const;
};

enum class OptimizerKind { GradientDescent, Adam };
enum class ReconstructionLossKind { Norm, Squared };

OptimizerKind parse_optimizer(std::string_view name);
std::string_view to_string(OptimizerKind k);

struct TrainConfig {
    double gamma_entropy = 1.0;  // weight of the entropy term in L_R - gamma * L_S
    int channels = 9;
    int order = 24;
    int h1 = 16;
    int h2 = 16;
    int h3 = 16;
    double learning_rate = 1e-3;
    int epochs = 500;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::Adam;
    InverseKernelPolicy inverse_policy = InverseKernelPolicy::Adjoint;
    bool decoder_constant_term = true;
    ReconstructionLossKind loss = ReconstructionLossKind::Norm;
    double leaky_slope = 0.2;
    double train_mask_rate = 0.1;  // re-masking rate for the self-supervised training signal
    int probe_graphs = 4;          // graphs used for the per-epoch oracle entropy probe
    bool select_best_validation = true;

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Everything the backward pass needs from one forward evaluation.
struct ForwardCache {
    Matrix z0;
    std::vector<Matrix> filtered;  // W_ĝm(Z0)
    std::vector<Matrix> p1, z1, p2, z2;
    std::vector<Matrix> synthesized;  // W_ĝm⁻¹(Z2_m)
    std::vector<Matrix> p3, z3;
    Matrix z_agg;
    Matrix p4;
    Matrix x_tilde;
};

double leaky_relu(double x, double slope);

ForwardCache forward(const ModelParams& params, const Laplacian& l, const FilterBank& bank, const Matrix& x_masked);

/// Per-channel latent Z2_m.
std::vector<Matrix> encode(const ModelParams& params, const Laplacian& l, const FilterBank& bank,
                           const Matrix& x_masked);

Matrix decode(const ModelParams& params, const Laplacian& l, const FilterBank& bank, const std::vector<Matrix>& z2);

/// ‖(X̃ - X) ⊙ (1 - R)‖_F.
double reconstruction_loss(const Matrix& x_tilde, const Matrix& x, const Matrix& r);

/// Same, with an explicit 0/1 loss mask in place of (1 - R); squared variant optional.
double masked_reconstruction_loss(const Matrix& x_tilde, const Matrix& x, const Matrix& loss_mask,
                                  ReconstructionLossKind kind = ReconstructionLossKind::Norm);

/// P(m, d): share of latent dimension d's energy carried by channel m. Columns with
/// no energy are all zero.
Matrix channel_energies(const std::vector<Matrix>& z2);

/// -(1/H2) Σ_d Σ_m P log P, in [0, log M].
double entropy_loss(const std::vector<Matrix>& z2);

inline double total_loss(double reconstruction, double entropy, double gamma) {
    return reconstruction - gamma * entropy;
}

/// One graph's worth of training signal.
struct GraphBatch {
    const Laplacian* laplacian = nullptr;
    Matrix x;          // ground truth (unknown entries may hold anything)
    Matrix input_mask; // R fed to the encoder
    Matrix loss_mask;  // entries scored by L_R
};

struct LossBreakdown {
    double reconstruction = 0.0;
    double entropy = 0.0;
    double total = 0.0;
};

LossBreakdown evaluate_loss(const ModelParams& params, const FilterBank& bank, const GraphBatch& batch,
                            double gamma, ReconstructionLossKind kind = ReconstructionLossKind::Norm);

/// Exact gradients of L_R - gamma*L_S for every weight. Throws NumericalError when
/// any gradient is non-finite.
ModelParams gradients(const ModelParams& params, const FilterBank& bank, const GraphBatch& batch, double gamma,
                      ReconstructionLossKind kind = ReconstructionLossKind::Norm, LossBreakdown* loss = nullptr);

/// Observed entries pass through: X⊙R + X̃⊙(1-R).
Matrix impute(const ModelParams& params, const Laplacian& l, const FilterBank& bank, const Matrix& x,
              const Matrix& r);

struct TrainingGraph {
    Laplacian laplacian;
    Matrix x;
    Matrix observed;  // entries whose ground truth may be used
};

struct EvalGraph {
    Laplacian laplacian;
    Matrix x;
    Matrix mask;    // fixed observation pattern fed to the model
    Matrix scored;  // entries scored; empty means every hidden entry
};

struct EpochRecord {
    int epoch = 0;
    double reconstruction = 0.0;  // mean over steps
    double entropy = 0.0;
    double total = 0.0;
    double validation_rmse = 0.0;
    double probe_spectral_entropy = 0.0;  // oracle entropy of imputed probe features
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochRecord> trace;
    int best_epoch = 0;  // 0 = initialization
    bool diverged = false;
    std::string diagnostics;
};

/// Full-batch-per-graph training. Deterministic in (graphs, config).
TrainResult train(const std::vector<TrainingGraph>& train_graphs, const std::vector<EvalGraph>& val_graphs,
                  const FilterBank& bank, const TrainConfig& config);

void to_json(nlohmann::json& j, const EpochRecord& r);

}  // namespace megae
