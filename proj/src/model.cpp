#include "megae/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

#include "megae/errors.hpp"
#include "megae/rng.hpp"
#include "megae/spectral_oracle.hpp"

namespace megae {

namespace {

Matrix glorot(int rows, int cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix w(rows, cols);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-limit, limit);
    }
    return w;
}

Matrix activate(const Matrix& p, double slope) {
    return p.unaryExpr([slope](double v) { return leaky_relu(v, slope); });
}

// dL/dP given dL/dZ for Z = φ(P).
Matrix activate_backward(const Matrix& grad_out, const Matrix& p, double slope) {
    return grad_out.cwiseProduct(p.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; }));
}

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw ConfigError(std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                          ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

}  // namespace

double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }

ModelParams ModelParams::zeros(const ModelShape& s, double slope) {
    ModelParams p;
    p.slope = slope;
    for (int m = 0; m < s.channels; ++m) {
        p.w0.push_back(Matrix::Zero(s.d_in, s.h1));
        p.w1.push_back(Matrix::Zero(s.h1, s.h2));
        p.w2.push_back(Matrix::Zero(s.h2, s.h3));
    }
    p.w3 = Matrix::Zero(static_cast<Eigen::Index>(s.channels) * s.h3, s.d_in);
    return p;
}

ModelParams ModelParams::initialize(const ModelShape& s, std::uint64_t seed, double slope) {
    if (s.channels < 1 || s.d_in < 1 || s.h1 < 1 || s.h2 < 1 || s.h3 < 1) {
        throw ConfigError("model dimensions must be positive");
    }
    Rng rng(seed);
    ModelParams p;
    p.slope = slope;
    for (int m = 0; m < s.channels; ++m) p.w0.push_back(glorot(s.d_in, s.h1, rng));
    for (int m = 0; m < s.channels; ++m) p.w1.push_back(glorot(s.h1, s.h2, rng));
    for (int m = 0; m < s.channels; ++m) p.w2.push_back(glorot(s.h2, s.h3, rng));
    p.w3 = glorot(s.channels * s.h3, s.d_in, rng);
    return p;
}

ModelShape ModelParams::shape() const {
    ModelShape s;
    s.channels = channels();
    if (!w0.empty()) {
        s.d_in = static_cast<int>(w0[0].rows());
        s.h1 = static_cast<int>(w0[0].cols());
        s.h2 = static_cast<int>(w1[0].cols());
        s.h3 = static_cast<int>(w2[0].cols());
    }
    return s;
}

void ModelParams::for_each(const std::function<void(Matrix&)>& fn) {
    for (auto& w : w0) fn(w);
    for (auto& w : w1) fn(w);
    for (auto& w : w2) fn(w);
    fn(w3);
}

void ModelParams::for_each(const std::function<void(const Matrix&)>& fn) const {
    for (const auto& w : w0) fn(w);
    for (const auto& w : w1) fn(w);
    for (const auto& w : w2) fn(w);
    fn(w3);
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for_each([&n](const Matrix& w) { n += static_cast<std::size_t>(w.size()); });
    return n;
}

bool ModelParams::all_finite() const {
    bool ok = true;
    for_each([&ok](const Matrix& w) { ok = ok && w.allFinite(); });
    return ok;
}

void ModelParams::validate() const {
    const auto m = w0.size();
    if (m == 0 || w1.size() != m || w2.size() != m) throw ConfigError("model needs the same nonzero channel count per layer");
    const ModelShape s = shape();
    for (std::size_t c = 0; c < m; ++c) {
        require_shape(w0[c], s.d_in, s.h1, "W0");
        require_shape(w1[c], s.h1, s.h2, "W1");
        require_shape(w2[c], s.h2, s.h3, "W2");
    }
    require_shape(w3, static_cast<Eigen::Index>(s.channels) * s.h3, s.d_in, "W3");
    if (!(slope > 0.0 && slope < 1.0)) throw ConfigError("leaky-ReLU slope must lie in (0, 1)");
}

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "adam") return OptimizerKind::Adam;
    if (name == "gd" || name == "sgd") return OptimizerKind::GradientDescent;
    throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "gd"; }

void TrainConfig::validate() const {
    if (gamma_entropy < 0.0) throw ConfigError("gamma must be nonnegative");
    if (channels < 3) throw ConfigError("need at least 3 wavelet channels");
    if (order < 1) throw ConfigError("filter order must be at least 1");
    if (h1 < 1 || h2 < 1 || h3 < 1) throw ConfigError("hidden widths must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (epochs < 0) throw ConfigError("epochs must be nonnegative");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky-ReLU slope must lie in (0, 1)");
    if (!(train_mask_rate > 0.0 && train_mask_rate < 1.0)) throw ConfigError("training mask rate must lie in (0, 1)");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"gamma_entropy", c.gamma_entropy},
                       {"channels", c.channels},
                       {"order", c.order},
                       {"h1", c.h1},
                       {"h2", c.h2},
                       {"h3", c.h3},
                       {"learning_rate", c.learning_rate},
                       {"epochs", c.epochs},
                       {"seed", c.seed},
                       {"optimizer", to_string(c.optimizer)},
                       {"inverse_policy", to_string(c.inverse_policy)},
                       {"decoder_constant_term", c.decoder_constant_term},
                       {"loss", c.loss == ReconstructionLossKind::Norm ? "norm" : "squared"},
                       {"leaky_slope", c.leaky_slope},
                       {"train_mask_rate", c.train_mask_rate},
                       {"probe_graphs", c.probe_graphs},
                       {"select_best_validation", c.select_best_validation}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    c.gamma_entropy = j.value("gamma_entropy", c.gamma_entropy);
    c.channels = j.value("channels", c.channels);
    c.order = j.value("order", c.order);
    c.h1 = j.value("h1", c.h1);
    c.h2 = j.value("h2", c.h2);
    c.h3 = j.value("h3", c.h3);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
    if (j.contains("inverse_policy")) c.inverse_policy = parse_inverse_policy(j.at("inverse_policy").get<std::string>());
    c.decoder_constant_term = j.value("decoder_constant_term", c.decoder_constant_term);
    if (j.contains("loss")) {
        const auto name = j.at("loss").get<std::string>();
        if (name == "norm") c.loss = ReconstructionLossKind::Norm;
        else if (name == "squared") c.loss = ReconstructionLossKind::Squared;
        else throw ConfigError("unknown reconstruction loss '" + name + "'");
    }
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.train_mask_rate = j.value("train_mask_rate", c.train_mask_rate);
    c.probe_graphs = j.value("probe_graphs", c.probe_graphs);
    c.select_best_validation = j.value("select_best_validation", c.select_best_validation);
}

ForwardCache forward(const ModelParams& params, const Laplacian& l, const FilterBank& bank, const Matrix& x_masked) {
    const ModelShape s = params.shape();
    const int m_count = s.channels;
    if (bank.channels() != m_count) throw ConfigError("filter bank and model disagree on channel count");
    if (x_masked.cols() != s.d_in) throw ConfigError("input has " + std::to_string(x_masked.cols()) + " columns, model expects " + std::to_string(s.d_in));
    if (x_masked.rows() != l.dimension()) throw ConfigError("input rows do not match the graph");
    const double slope = params.slope;

    ForwardCache c;
    c.z0 = x_masked;
    const auto n = x_masked.rows();
    c.z_agg.resize(n, static_cast<Eigen::Index>(m_count) * s.h3);
    for (int m = 0; m < m_count; ++m) {
        const auto um = static_cast<std::size_t>(m);
        c.filtered.push_back(apply_filter(bank.analysis[um], l, c.z0));
        c.p1.push_back(c.filtered.back() * params.w0[um]);
        c.z1.push_back(activate(c.p1.back(), slope));
        c.p2.push_back(c.z1.back() * params.w1[um]);
        c.z2.push_back(activate(c.p2.back(), slope));
        c.synthesized.push_back(apply_filter(bank.synthesis[um], l, c.z2.back()));
        c.p3.push_back(c.synthesized.back() * params.w2[um]);
        c.z3.push_back(activate(c.p3.back(), slope));
        c.z_agg.middleCols(static_cast<Eigen::Index>(m) * s.h3, s.h3) = c.z3.back();
    }
    c.p4 = c.z_agg * params.w3;
    c.x_tilde = activate(c.p4, slope);
    return c;
}

std::vector<Matrix> encode(const ModelParams& params, const Laplacian& l, const FilterBank& bank,
                           const Matrix& x_masked) {
    const ModelShape s = params.shape();
    if (bank.channels() != s.channels) throw ConfigError("filter bank and model disagree on channel count");
    if (x_masked.cols() != s.d_in || x_masked.rows() != l.dimension()) throw ConfigError("encode: input shape mismatch");
    std::vector<Matrix> z2;
    for (int m = 0; m < s.channels; ++m) {
        const auto um = static_cast<std::size_t>(m);
        const Matrix z1 = activate(apply_filter(bank.analysis[um], l, x_masked) * params.w0[um], params.slope);
        z2.push_back(activate(z1 * params.w1[um], params.slope));
    }
    return z2;
}

Matrix decode(const ModelParams& params, const Laplacian& l, const FilterBank& bank, const std::vector<Matrix>& z2) {
    const ModelShape s = params.shape();
    if (static_cast<int>(z2.size()) != s.channels || bank.channels() != s.channels) {
        throw ConfigError("decode: channel count mismatch");
    }
    const auto n = l.dimension();
    Matrix z_agg(n, static_cast<Eigen::Index>(s.channels) * s.h3);
    for (int m = 0; m < s.channels; ++m) {
        const auto um = static_cast<std::size_t>(m);
        require_shape(z2[um], n, s.h2, "decode latent");
        const Matrix z3 = activate(apply_filter(bank.synthesis[um], l, z2[um]) * params.w2[um], params.slope);
        z_agg.middleCols(static_cast<Eigen::Index>(m) * s.h3, s.h3) = z3;
    }
    return activate(z_agg * params.w3, params.slope);
}

double reconstruction_loss(const Matrix& x_tilde, const Matrix& x, const Matrix& r) {
    if (x_tilde.rows() != x.rows() || x_tilde.cols() != x.cols() || r.rows() != x.rows() || r.cols() != x.cols()) {
        throw ConfigError("reconstruction_loss: shape mismatch");
    }
    return ((x_tilde - x).array() * (1.0 - r.array())).matrix().norm();
}

double masked_reconstruction_loss(const Matrix& x_tilde, const Matrix& x, const Matrix& loss_mask,
                                  ReconstructionLossKind kind) {
    const Matrix e = ((x_tilde - x).array() * loss_mask.array()).matrix();
    return kind == ReconstructionLossKind::Norm ? e.norm() : e.squaredNorm();
}

Matrix channel_energies(const std::vector<Matrix>& z2) {
    if (z2.empty()) throw ConfigError("channel_energies: no channels");
    const auto h2 = z2.front().cols();
    Matrix p(static_cast<Eigen::Index>(z2.size()), h2);
    for (std::size_t m = 0; m < z2.size(); ++m) {
        if (z2[m].cols() != h2) throw ConfigError("channel_energies: latent widths differ");
        p.row(static_cast<Eigen::Index>(m)) = z2[m].colwise().squaredNorm();
    }
    for (Eigen::Index d = 0; d < h2; ++d) {
        const double total = p.col(d).sum();
        if (total > 0.0) p.col(d) /= total;
        else p.col(d).setZero();
    }
    return p;
}

double entropy_loss(const std::vector<Matrix>& z2) {
    const Matrix p = channel_energies(z2);
    double h = 0.0;
    for (Eigen::Index d = 0; d < p.cols(); ++d) {
        for (Eigen::Index m = 0; m < p.rows(); ++m) {
            const double v = p(m, d);
            if (v > 0.0) h -= v * std::log(v);
        }
    }
    return h / static_cast<double>(p.cols());
}

LossBreakdown evaluate_loss(const ModelParams& params, const FilterBank& bank, const GraphBatch& batch, double gamma,
                            ReconstructionLossKind kind) {
    const Matrix x_masked = (batch.x.array() * batch.input_mask.array()).matrix();
    const ForwardCache c = forward(params, *batch.laplacian, bank, x_masked);
    LossBreakdown lb;
    lb.reconstruction = masked_reconstruction_loss(c.x_tilde, batch.x, batch.loss_mask, kind);
    lb.entropy = entropy_loss(c.z2);
    lb.total = total_loss(lb.reconstruction, lb.entropy, gamma);
    return lb;
}

ModelParams gradients(const ModelParams& params, const FilterBank& bank, const GraphBatch& batch, double gamma,
                      ReconstructionLossKind kind, LossBreakdown* loss) {
    const Laplacian& l = *batch.laplacian;
    const Matrix x_masked = (batch.x.array() * batch.input_mask.array()).matrix();
    const ForwardCache c = forward(params, l, bank, x_masked);
    const ModelShape s = params.shape();
    const double slope = params.slope;
    ModelParams g = ModelParams::zeros(s, slope);

    // Reconstruction term.
    const Matrix err = ((c.x_tilde - batch.x).array() * batch.loss_mask.array()).matrix();
    Matrix d_xt;
    double lr = 0.0;
    if (kind == ReconstructionLossKind::Norm) {
        lr = err.norm();
        d_xt = lr > 0.0 ? Matrix(err / lr) : Matrix::Zero(err.rows(), err.cols());
    } else {
        lr = err.squaredNorm();
        d_xt = 2.0 * err;
    }
    const Matrix d_p4 = activate_backward(d_xt, c.p4, slope);
    g.w3 = c.z_agg.transpose() * d_p4;
    const Matrix d_agg = d_p4 * params.w3.transpose();

    // Entropy term: dH_d/de_md = -(log p_md + H_d)/S_d, e_md = ‖Z2_m(:,d)‖².
    const auto h2 = s.h2;
    Matrix energy(s.channels, h2);
    for (int m = 0; m < s.channels; ++m) energy.row(m) = c.z2[static_cast<std::size_t>(m)].colwise().squaredNorm();
    Matrix d_energy = Matrix::Zero(s.channels, h2);
    double ls = 0.0;
    for (Eigen::Index d = 0; d < h2; ++d) {
        const double total = energy.col(d).sum();
        if (!(total > 0.0)) continue;
        double h = 0.0;
        for (int m = 0; m < s.channels; ++m) {
            const double p = energy(m, d) / total;
            if (p > 0.0) h -= p * std::log(p);
        }
        ls += h;
        for (int m = 0; m < s.channels; ++m) {
            const double p = energy(m, d) / total;
            if (p > 0.0) d_energy(m, d) = -(std::log(p) + h) / total;
        }
    }
    ls /= static_cast<double>(h2);
    // dL/de = -gamma * (1/H2) * dH/de
    d_energy *= -gamma / static_cast<double>(h2);

    for (int m = 0; m < s.channels; ++m) {
        const auto um = static_cast<std::size_t>(m);
        const Matrix d_z3 = d_agg.middleCols(static_cast<Eigen::Index>(m) * s.h3, s.h3);
        const Matrix d_p3 = activate_backward(d_z3, c.p3[um], slope);
        g.w2[um] = c.synthesized[um].transpose() * d_p3;
        const Matrix d_synth = d_p3 * params.w2[um].transpose();
        // Polynomial filters in a symmetric L are self-adjoint.
        Matrix d_z2 = apply_filter(bank.synthesis[um], l, d_synth);
        d_z2 += 2.0 * (c.z2[um].array().rowwise() * d_energy.row(m).array()).matrix();
        const Matrix d_p2 = activate_backward(d_z2, c.p2[um], slope);
        g.w1[um] = c.z1[um].transpose() * d_p2;
        const Matrix d_z1 = d_p2 * params.w1[um].transpose();
        const Matrix d_p1 = activate_backward(d_z1, c.p1[um], slope);
        g.w0[um] = c.filtered[um].transpose() * d_p1;
    }

    if (loss) {
        loss->reconstruction = lr;
        loss->entropy = ls;
        loss->total = total_loss(lr, ls, gamma);
    }
    if (!g.all_finite()) throw NumericalError("non-finite gradient (L_R=" + std::to_string(lr) + ", L_S=" + std::to_string(ls) + ")");
    return g;
}

Matrix impute(const ModelParams& params, const Laplacian& l, const FilterBank& bank, const Matrix& x, const Matrix& r) {
    if (x.rows() != r.rows() || x.cols() != r.cols()) throw ConfigError("impute: feature/mask shape mismatch");
    const Matrix x_masked = (x.array() * r.array()).matrix();
    const Matrix x_tilde = decode(params, l, bank, encode(params, l, bank, x_masked));
    return (x_masked.array() + x_tilde.array() * (1.0 - r.array())).matrix();
}

namespace {

struct AdamState {
    ModelParams m;
    ModelParams v;
    long step = 0;
};

void apply_update(ModelParams& params, const ModelParams& grad, const TrainConfig& cfg, AdamState& state) {
    if (cfg.optimizer == OptimizerKind::GradientDescent) {
        std::vector<const Matrix*> grads;
        grad.for_each([&grads](const Matrix& w) { grads.push_back(&w); });
        std::size_t k = 0;
        params.for_each([&](Matrix& w) { w -= cfg.learning_rate * *grads[k++]; });
        return;
    }
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    ++state.step;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
    std::vector<const Matrix*> grads;
    std::vector<Matrix*> ms;
    std::vector<Matrix*> vs;
    grad.for_each([&grads](const Matrix& w) { grads.push_back(&w); });
    state.m.for_each([&ms](Matrix& w) { ms.push_back(&w); });
    state.v.for_each([&vs](Matrix& w) { vs.push_back(&w); });
    std::size_t k = 0;
    params.for_each([&](Matrix& w) {
        const Matrix& gk = *grads[k];
        Matrix& mk = *ms[k];
        Matrix& vk = *vs[k];
        mk = kBeta1 * mk + (1.0 - kBeta1) * gk;
        vk = kBeta2 * vk + (1.0 - kBeta2) * gk.cwiseAbs2();
        w.array() -= cfg.learning_rate * (mk.array() / c1) / ((vk.array() / c2).sqrt() + kEps);
        ++k;
    });
}

double validation_rmse(const ModelParams& params, const FilterBank& bank, const std::vector<EvalGraph>& graphs) {
    double sq = 0.0;
    double count = 0.0;
    for (const auto& g : graphs) {
        const Matrix imputed = impute(params, g.laplacian, bank, g.x, g.mask);
        const Matrix hidden = g.scored.size() ? g.scored : Matrix((1.0 - g.mask.array()).matrix());
        sq += ((imputed - g.x).array().square() * hidden.array()).sum();
        count += hidden.sum();
    }
    return count > 0.0 ? std::sqrt(sq / count) : 0.0;
}

struct Probe {
    const EvalGraph* graph;
    oracle::SpectralDecomposition sd;
};

double probe_entropy(const ModelParams& params, const FilterBank& bank, const std::vector<Probe>& probes) {
    double total = 0.0;
    int count = 0;
    for (const auto& p : probes) {
        const Matrix imputed = impute(params, p.graph->laplacian, bank, p.graph->x, p.graph->mask);
        for (Eigen::Index c = 0; c < imputed.cols(); ++c) {
            const Vector col = imputed.col(c);
            if (col.squaredNorm() <= oracle::kMinSignalEnergy) continue;
            total += oracle::spectral_entropy(col, p.sd);
            ++count;
        }
    }
    return count ? total / count : 0.0;
}

}  // namespace

TrainResult train(const std::vector<TrainingGraph>& train_graphs, const std::vector<EvalGraph>& val_graphs,
                  const FilterBank& bank, const TrainConfig& config) {
    config.validate();
    if (train_graphs.empty()) throw ConfigError("no training graphs");
    const int d_in = static_cast<int>(train_graphs.front().x.cols());
    ModelShape shape{config.channels, d_in, config.h1, config.h2, config.h3};
    TrainResult result;
    result.params = ModelParams::initialize(shape, Rng::derive(config.seed, 1), config.leaky_slope);
    if (config.epochs == 0) return result;

    std::vector<Probe> probes;
    for (std::size_t i = 0; i < val_graphs.size() && static_cast<int>(i) < config.probe_graphs; ++i) {
        if (val_graphs[i].laplacian.dimension() <= oracle::kMaxOracleNodes) {
            probes.push_back({&val_graphs[i], oracle::eigendecompose(val_graphs[i].laplacian)});
        }
    }

    ModelParams params = result.params;
    ModelParams best = params;
    double best_val = val_graphs.empty() ? 0.0 : validation_rmse(params, bank, val_graphs);
    AdamState adam{ModelParams::zeros(shape), ModelParams::zeros(shape), 0};
    Rng order_rng(Rng::derive(config.seed, 2));
    std::vector<int> order(train_graphs.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        order_rng.shuffle(std::span<int>(order));
        EpochRecord rec;
        rec.epoch = epoch;
        for (int gi : order) {
            const auto& tg = train_graphs[static_cast<std::size_t>(gi)];
            const std::uint64_t mask_seed =
                Rng::derive(Rng::derive(config.seed, 1000 + static_cast<std::uint64_t>(epoch)), static_cast<std::uint64_t>(gi));
            const Matrix keep = generate_mask(static_cast<int>(tg.x.rows()), static_cast<int>(tg.x.cols()),
                                              Mechanism::MCAR, config.train_mask_rate, mask_seed);
            GraphBatch batch{&tg.laplacian, tg.x, (keep.array() * tg.observed.array()).matrix(),
                             ((1.0 - keep.array()) * tg.observed.array()).matrix()};
            LossBreakdown lb;
            ModelParams grad;
            try {
                grad = gradients(params, bank, batch, config.gamma_entropy, config.loss, &lb);
            } catch (const NumericalError& e) {
                result.diverged = true;
                result.diagnostics = "epoch " + std::to_string(epoch) + ": " + e.what();
                break;
            }
            apply_update(params, grad, config, adam);
            rec.reconstruction += lb.reconstruction;
            rec.entropy += lb.entropy;
            rec.total += lb.total;
        }
        if (result.diverged || !params.all_finite() || !std::isfinite(rec.total)) {
            result.diverged = true;
            if (result.diagnostics.empty()) result.diagnostics = "epoch " + std::to_string(epoch) + ": non-finite loss or weights";
            break;
        }
        const double steps = static_cast<double>(train_graphs.size());
        rec.reconstruction /= steps;
        rec.entropy /= steps;
        rec.total /= steps;
        if (!val_graphs.empty()) {
            rec.validation_rmse = validation_rmse(params, bank, val_graphs);
            if (!config.select_best_validation || rec.validation_rmse < best_val) {
                best_val = rec.validation_rmse;
                best = params;
                result.best_epoch = epoch;
            }
        } else {
            best = params;
            result.best_epoch = epoch;
        }
        if (!probes.empty()) rec.probe_spectral_entropy = probe_entropy(params, bank, probes);
        result.trace.push_back(rec);
    }
    // `best` only ever holds finite weights, so divergence falls back to it.
    result.params = std::move(best);
    return result;
}

void to_json(nlohmann::json& j, const EpochRecord& r) {
    j = nlohmann::json{{"epoch", r.epoch},
                       {"reconstruction", r.reconstruction},
                       {"entropy", r.entropy},
                       {"total", r.total},
                       {"validation_rmse", r.validation_rmse},
                       {"probe_spectral_entropy", r.probe_spectral_entropy}};
}

}  // namespace megae
