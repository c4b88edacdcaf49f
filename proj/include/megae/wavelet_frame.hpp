#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "megae/graph.hpp"
#include "megae/kernel.hpp"

namespace megae {

/// Parameters of the log-warped uniform-translate tight frame.
struct FrameSpec {
    int channels = 9;                          // M
    int translates = 4;                        // T, 2 < T <= M
    std::vector<double> coefficients{0.5, 0.5};  // a_0..a_Q, Q < T/2, Σ(-1)^q a_q = 0
    double spectrum_bound = 2.0;               // normalized-Laplacian bound
    double eps_log = 0.1;                      // warp ω(λ) = log(λ + eps_log) - log(eps_log)

    int order_q() const { return static_cast<int>(coefficients.size()) - 1; }

    /// Throws ConfigError when an invariant fails.
    void validate() const;

    /// Default spec with T clamped to the channel count (T = min(4, M)).
    static FrameSpec with_channels(int m);
};

void to_json(nlohmann::json& j, const FrameSpec& s);
void from_json(const nlohmann::json& j, FrameSpec& s);

/// M kernels forming a tight frame: Σ_m ĝ_m(λ)² = 1 on [0, spectrum_bound].
class WaveletFrame {
public:
    explicit WaveletFrame(FrameSpec spec);

    const FrameSpec& spec() const { return spec_; }
    const KernelSet& kernels() const { return kernels_; }
    int channels() const { return spec_.channels; }

    /// Constant value of Σ_m [ĝ^U_m]² before normalization.
    double translate_energy() const;

    /// Unnormalized translate ĝ^U_m evaluated in the warped coordinate.
    double raw_translate(int m, double warped) const;
    double warp(double lambda) const;
    double warped_bound() const;

    /// Normalized kernel m (1-based).
    double evaluate(int m, double lambda) const;

    struct Shape;

private:
    FrameSpec spec_;
    std::shared_ptr<const Shape> shape_;
    KernelSet kernels_;
};

WaveletFrame build_frame(const FrameSpec& spec);

/// max_λ |Σ_m ĝ_m(λ)² - 1| over the given points.
double verify_tightness(const KernelSet& frame, const Vector& points);

/// Uniform grid of `count` points on [0, bound], endpoints included.
Vector uniform_grid(double bound, int count);

/// p(λ) = Σ_k coefficients[k] (λ - center)^k.
struct PolyFilter {
    int channel = 1;
    double center = 0.0;
    std::vector<double> coefficients;
    double fit_error = 0.0;

    int order() const { return static_cast<int>(coefficients.size()) - 1; }
    double evaluate(double lambda) const;
};

void to_json(nlohmann::json& j, const PolyFilter& f);
void from_json(const nlohmann::json& j, PolyFilter& f);

struct FitOptions {
    double spectrum_bound = 2.0;
    double center = 1.0;
    /// When false the fit is constrained to p(0) = 0 (a sum starting at k = 1 in powers of L).
    bool constant_term = true;
};

/// Least-squares fit of `kernel` on a uniform grid over [0, spectrum_bound].
/// Requires order >= 1 and grid >= 10 * order.
PolyFilter fit_polynomial(const KernelFunction& kernel, int order, int grid, const FitOptions& options = {});

struct FilterStats {
    std::int64_t spmv_columns = 0;  // column-wise Laplacian products performed
};

/// Σ_k c_k (L - center·I)^k Z by Horner's rule: exactly `order` sparse products per column.
Matrix apply_filter(const PolyFilter& pf, const Laplacian& l, const Matrix& z, FilterStats* stats = nullptr);

enum class InverseKernelPolicy {
    Adjoint,      // ĝ⁻¹ := ĝ, exact synthesis for a tight frame
    Regularized,  // ĝ / (ĝ² + ε)
};

InverseKernelPolicy parse_inverse_policy(std::string_view name);
std::string_view to_string(InverseKernelPolicy p);

struct FilterBankOptions {
    int order = 24;
    int grid = 2000;
    InverseKernelPolicy inverse_policy = InverseKernelPolicy::Adjoint;
    double regularization = 1e-2;
    bool decoder_constant_term = true;
};

void to_json(nlohmann::json& j, const FilterBankOptions& o);
void from_json(const nlohmann::json& j, FilterBankOptions& o);

/// Fitted encoder (analysis) and decoder (synthesis) filters for every channel.
struct FilterBank {
    std::vector<PolyFilter> analysis;
    std::vector<PolyFilter> synthesis;
    FilterBankOptions options;

    int channels() const { return static_cast<int>(analysis.size()); }
    double max_fit_error() const;
};

FilterBank build_filter_bank(const WaveletFrame& frame, const FilterBankOptions& options);

/// Polynomial filters wrapped as kernels so the oracle can evaluate them.
KernelSet as_kernels(const std::vector<PolyFilter>& filters);

/// Σ_m ‖apply_filter_m(z)‖² over all columns.
double filtered_energy(const std::vector<PolyFilter>& filters, const Laplacian& l, const Matrix& z);

}  // namespace megae
