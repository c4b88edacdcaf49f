#include "megae/wavelet_frame.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <nlohmann/json.hpp>

#include "megae/errors.hpp"

namespace megae {

void FrameSpec::validate() const {
    if (channels < 3) throw ConfigError("frame needs at least 3 channels, got " + std::to_string(channels));
    if (translates <= 2 || translates > channels) {
        throw ConfigError("translate count T must satisfy 2 < T <= M (T=" + std::to_string(translates) +
                          ", M=" + std::to_string(channels) + ")");
    }
    if (coefficients.empty()) throw ConfigError("frame needs at least one coefficient a_0");
    if (2 * order_q() >= translates) {
        throw ConfigError("coefficient order Q must satisfy Q < T/2 (Q=" + std::to_string(order_q()) + ")");
    }
    double alternating = 0.0;
    for (std::size_t q = 0; q < coefficients.size(); ++q) alternating += (q % 2 ? -1.0 : 1.0) * coefficients[q];
    if (std::abs(alternating) > 1e-12) {
        throw ConfigError("coefficients violate the alternating-sum constraint (sum = " +
                          std::to_string(alternating) + ")");
    }
    if (!(spectrum_bound > 0.0)) throw ConfigError("spectrum bound must be positive");
    if (!(eps_log > 0.0)) throw ConfigError("eps_log must be positive");
}

FrameSpec FrameSpec::with_channels(int m) {
    FrameSpec s;
    s.channels = m;
    s.translates = std::min(4, m);
    return s;
}

void to_json(nlohmann::json& j, const FrameSpec& s) {
    j = nlohmann::json{{"channels", s.channels},
                       {"translates", s.translates},
                       {"coefficients", s.coefficients},
                       {"spectrum_bound", s.spectrum_bound},
                       {"eps_log", s.eps_log}};
}

void from_json(const nlohmann::json& j, FrameSpec& s) {
    s.channels = j.value("channels", s.channels);
    s.translates = j.value("translates", s.translates);
    s.coefficients = j.value("coefficients", s.coefficients);
    s.spectrum_bound = j.value("spectrum_bound", s.spectrum_bound);
    s.eps_log = j.value("eps_log", s.eps_log);
}

struct WaveletFrame::Shape {
    FrameSpec spec;
    double translate_energy = 1.0;
    double warped_bound = 0.0;
    double dilation = 0.0;

    double warp(double lambda) const {
        const double l = std::max(lambda, 0.0);
        return std::log(l + spec.eps_log) - std::log(spec.eps_log);
    }

    double raw_translate(int m, double warped) const {
        const double t = spec.translates;
        const double v = warped - m * dilation;
        if (v < -t * dilation || v >= 0.0) return 0.0;
        double g = 0.0;
        for (std::size_t q = 0; q < spec.coefficients.size(); ++q) {
            g += spec.coefficients[q] *
                 std::cos(2.0 * std::numbers::pi * static_cast<double>(q) * (v / (dilation * t) + 0.5));
        }
        return g;
    }

    double evaluate(int m, double lambda) const {
        const double u = warp(lambda);
        const double norm = std::sqrt(translate_energy);
        if (m >= 2) return raw_translate(m, u) / norm;
        double s = 0.0;
        for (int k = 2; k <= spec.channels; ++k) {
            const double g = raw_translate(k, u) / norm;
            s += g * g;
        }
        return std::sqrt(std::max(0.0, 1.0 - s));
    }
};

WaveletFrame::WaveletFrame(FrameSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    auto shape = std::make_shared<Shape>();
    shape->spec = spec_;
    const auto& a = spec_.coefficients;
    const double t = spec_.translates;
    double tail = 0.0;
    for (std::size_t q = 1; q < a.size(); ++q) tail += a[q] * a[q];
    shape->translate_energy = t * a[0] * a[0] + 0.5 * t * tail;
    if (!(shape->translate_energy > 0.0)) throw ConfigError("frame coefficients give zero energy");
    shape->warped_bound = shape->warp(spec_.spectrum_bound);
    shape->dilation = shape->warped_bound / static_cast<double>(spec_.channels + 1 - spec_.translates);

    // Residual kernel must stay real; evaluation clamps tiny negatives.
    const Vector grid = uniform_grid(spec_.spectrum_bound, 10000);
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        double s = 0.0;
        for (int m = 2; m <= spec_.channels; ++m) {
            const double g = shape->raw_translate(m, shape->warp(grid(i)));
            s += g * g;
        }
        if (1.0 - s / shape->translate_energy < -1e-9) {
            throw ConfigError("frame residual kernel is negative at lambda=" + std::to_string(grid(i)));
        }
    }
    shape_ = shape;

    kernels_.reserve(static_cast<std::size_t>(spec_.channels));
    for (int m = 1; m <= spec_.channels; ++m) {
        kernels_.push_back({m, [shape, m](double l) { return shape->evaluate(m, l); }});
    }
}

double WaveletFrame::translate_energy() const { return shape_->translate_energy; }
double WaveletFrame::warped_bound() const { return shape_->warped_bound; }
double WaveletFrame::warp(double lambda) const { return shape_->warp(lambda); }
double WaveletFrame::raw_translate(int m, double warped) const { return shape_->raw_translate(m, warped); }
double WaveletFrame::evaluate(int m, double lambda) const { return shape_->evaluate(m, lambda); }

WaveletFrame build_frame(const FrameSpec& spec) { return WaveletFrame(spec); }

double verify_tightness(const KernelSet& frame, const Vector& points) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < points.size(); ++i) {
        double g2 = 0.0;
        for (const auto& k : frame) {
            const double g = k(points(i));
            g2 += g * g;
        }
        worst = std::max(worst, std::abs(g2 - 1.0));
    }
    return worst;
}

Vector uniform_grid(double bound, int count) {
    if (count < 2) throw ConfigError("grid needs at least two points");
    return Vector::LinSpaced(count, 0.0, bound);
}

double PolyFilter::evaluate(double lambda) const {
    const double x = lambda - center;
    double acc = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
    return acc;
}

void to_json(nlohmann::json& j, const PolyFilter& f) {
    j = nlohmann::json{{"channel", f.channel}, {"center", f.center}, {"coefficients", f.coefficients},
                       {"fit_error", f.fit_error}};
}

void from_json(const nlohmann::json& j, PolyFilter& f) {
    f.channel = j.at("channel").get<int>();
    f.center = j.at("center").get<double>();
    f.coefficients = j.at("coefficients").get<std::vector<double>>();
    f.fit_error = j.value("fit_error", 0.0);
}

namespace {

using Poly = std::vector<long double>;

// Monomial coefficients (in t) of Σ_j b_j T_j(t).
Poly chebyshev_to_monomial(const Vector& b) {
    const auto n = static_cast<std::size_t>(b.size());
    Poly result(n, 0.0L);
    Poly prev(n, 0.0L);
    Poly cur(n, 0.0L);
    prev[0] = 1.0L;  // T_0
    result[0] += static_cast<long double>(b(0)) * prev[0];
    if (n == 1) return result;
    cur[1] = 1.0L;  // T_1
    for (std::size_t k = 0; k < n; ++k) result[k] += static_cast<long double>(b(1)) * cur[k];
    for (std::size_t j = 2; j < n; ++j) {
        Poly next(n, 0.0L);
        for (std::size_t k = 0; k + 1 < n; ++k) next[k + 1] += 2.0L * cur[k];
        for (std::size_t k = 0; k < n; ++k) next[k] -= prev[k];
        for (std::size_t k = 0; k < n; ++k) result[k] += static_cast<long double>(b(static_cast<Eigen::Index>(j))) * next[k];
        prev = std::move(cur);
        cur = std::move(next);
    }
    return result;
}

// Given p(x) = Σ c_k (x - from)^k, return coefficients about `to`.
Poly taylor_shift(Poly c, long double from, long double to) {
    const long double delta = to - from;
    if (delta == 0.0L) return c;
    // Repeated synthetic division by (y + delta), y = x - to.
    const std::size_t n = c.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = n - 1; k > i; --k) c[k - 1] += delta * c[k];
    }
    return c;
}

}  // namespace

PolyFilter fit_polynomial(const KernelFunction& kernel, int order, int grid, const FitOptions& options) {
    if (order < 1) throw ConfigError("polynomial order must be at least 1");
    if (grid < 10 * order) {
        throw ConfigError("fitting grid of " + std::to_string(grid) + " points too small for order " +
                          std::to_string(order) + " (need >= 10*K)");
    }
    const double bound = options.spectrum_bound;
    const Vector lambdas = uniform_grid(bound, grid);
    Vector target(grid);
    for (int i = 0; i < grid; ++i) {
        target(i) = kernel(lambdas(i));
        if (!std::isfinite(target(i))) throw NumericalError("kernel is not finite on the fitting grid");
    }

    // Chebyshev basis on t = 2λ/bound - 1; the p(0) = 0 constraint drops T_0 and
    // shifts every T_j by its value at t = -1.
    const int first = options.constant_term ? 0 : 1;
    const int n_basis = order + 1 - first;
    Matrix basis(grid, n_basis);
    for (int i = 0; i < grid; ++i) {
        const double t = 2.0 * lambdas(i) / bound - 1.0;
        double prev = 1.0;
        double cur = t;
        for (int j = 0; j <= order; ++j) {
            double tj = 0.0;
            if (j == 0) tj = 1.0;
            else if (j == 1) tj = t;
            else {
                const double next = 2.0 * t * cur - prev;
                prev = cur;
                cur = next;
                tj = next;
            }
            if (j >= first) basis(i, j - first) = options.constant_term ? tj : tj - (j % 2 ? -1.0 : 1.0);
        }
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(basis);
    qr.setThreshold(1e-12);
    if (qr.rank() < n_basis) {
        throw NumericalError("least-squares system is ill-conditioned for order " + std::to_string(order));
    }
    const Vector solved = qr.solve(target);

    Vector cheb = Vector::Zero(order + 1);
    if (options.constant_term) {
        cheb = solved;
    } else {
        double c0 = 0.0;
        for (int j = 1; j <= order; ++j) {
            cheb(j) = solved(j - 1);
            c0 -= solved(j - 1) * (j % 2 ? -1.0 : 1.0);
        }
        cheb(0) = c0;
    }

    // Monomials in t = (λ - h)/h, h = bound/2, rescaled to powers of (λ - h), then shifted.
    Poly mono = chebyshev_to_monomial(cheb);
    const long double half = static_cast<long double>(bound) / 2.0L;
    long double scale = 1.0L;
    for (auto& c : mono) {
        c /= scale;
        scale *= half;
    }
    mono = taylor_shift(std::move(mono), half, static_cast<long double>(options.center));

    PolyFilter pf;
    pf.channel = kernel.channel;
    pf.center = options.center;
    pf.coefficients.assign(mono.begin(), mono.end());
    if (!options.constant_term && options.center == 0.0) pf.coefficients[0] = 0.0;
    double worst = 0.0;
    for (int i = 0; i < grid; ++i) worst = std::max(worst, std::abs(pf.evaluate(lambdas(i)) - target(i)));
    pf.fit_error = worst;
    return pf;
}

Matrix apply_filter(const PolyFilter& pf, const Laplacian& l, const Matrix& z, FilterStats* stats) {
    if (z.rows() != l.dimension()) {
        throw ConfigError("apply_filter: input has " + std::to_string(z.rows()) + " rows, Laplacian has dimension " +
                          std::to_string(l.dimension()));
    }
    if (pf.coefficients.empty()) throw ConfigError("apply_filter: empty coefficient list");
    const int k_max = pf.order();
    Matrix y = pf.coefficients[static_cast<std::size_t>(k_max)] * z;
    for (int k = k_max - 1; k >= 0; --k) {
        Matrix ly = l.entries() * y;
        if (pf.center != 0.0) ly -= pf.center * y;
        ly += pf.coefficients[static_cast<std::size_t>(k)] * z;
        y = std::move(ly);
    }
    if (stats) stats->spmv_columns += static_cast<std::int64_t>(k_max) * z.cols();
    return y;
}

InverseKernelPolicy parse_inverse_policy(std::string_view name) {
    if (name == "adjoint") return InverseKernelPolicy::Adjoint;
    if (name == "regularized") return InverseKernelPolicy::Regularized;
    throw ConfigError("unknown inverse-kernel policy '" + std::string(name) + "'");
}

std::string_view to_string(InverseKernelPolicy p) {
    return p == InverseKernelPolicy::Adjoint ? "adjoint" : "regularized";
}

void to_json(nlohmann::json& j, const FilterBankOptions& o) {
    j = nlohmann::json{{"order", o.order},
                       {"grid", o.grid},
                       {"inverse_policy", to_string(o.inverse_policy)},
                       {"regularization", o.regularization},
                       {"decoder_constant_term", o.decoder_constant_term}};
}

void from_json(const nlohmann::json& j, FilterBankOptions& o) {
    o.order = j.value("order", o.order);
    o.grid = j.value("grid", o.grid);
    if (j.contains("inverse_policy")) o.inverse_policy = parse_inverse_policy(j.at("inverse_policy").get<std::string>());
    o.regularization = j.value("regularization", o.regularization);
    o.decoder_constant_term = j.value("decoder_constant_term", o.decoder_constant_term);
}

double FilterBank::max_fit_error() const {
    double worst = 0.0;
    for (const auto& f : analysis) worst = std::max(worst, f.fit_error);
    for (const auto& f : synthesis) worst = std::max(worst, f.fit_error);
    return worst;
}

FilterBank build_filter_bank(const WaveletFrame& frame, const FilterBankOptions& options) {
    FilterBank bank;
    bank.options = options;
    const double bound = frame.spec().spectrum_bound;
    const FitOptions forward{bound, bound / 2.0, true};
    const FitOptions backward{bound, bound / 2.0, options.decoder_constant_term};
    for (const auto& kernel : frame.kernels()) {
        bank.analysis.push_back(fit_polynomial(kernel, options.order, options.grid, forward));
        KernelFunction inverse = kernel;
        if (options.inverse_policy == InverseKernelPolicy::Regularized) {
            inverse.eval = [kernel, eps = options.regularization](double l) {
                const double g = kernel(l);
                return g / (g * g + eps);
            };
        }
        bank.synthesis.push_back(fit_polynomial(inverse, options.order, options.grid, backward));
    }
    return bank;
}

KernelSet as_kernels(const std::vector<PolyFilter>& filters) {
    KernelSet out;
    out.reserve(filters.size());
    for (const auto& f : filters) out.push_back({f.channel, [f](double l) { return f.evaluate(l); }});
    return out;
}

double filtered_energy(const std::vector<PolyFilter>& filters, const Laplacian& l, const Matrix& z) {
    double e = 0.0;
    for (const auto& f : filters) e += apply_filter(f, l, z).squaredNorm();
    return e;
}

}  // namespace megae
