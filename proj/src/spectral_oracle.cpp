#include "megae/spectral_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "megae/errors.hpp"

namespace megae::oracle {

SpectralDecomposition eigendecompose(const Laplacian& l) {
    const int n = l.dimension();
    if (n > kMaxOracleNodes) {
        throw ConfigError("oracle eigendecomposition limited to " + std::to_string(kMaxOracleNodes) + " nodes");
    }
    const Matrix dense = l.dense();
    const double asym = n > 0 ? (dense - dense.transpose()).cwiseAbs().maxCoeff() : 0.0;
    if (asym > 1e-12) throw NumericalError("eigendecompose: Laplacian is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(dense);
    if (solver.info() != Eigen::Success) throw NumericalError("eigendecompose: solver did not converge");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

double normalized_entropy(std::span<const double> energies) {
    double total = 0.0;
    for (double e : energies) total += e;
    if (!(total > kMinSignalEnergy)) throw NumericalError("entropy of a zero-energy signal is undefined");
    double h = 0.0;
    for (double e : energies) {
        if (e <= 0.0) continue;
        const double p = e / total;
        h -= p * std::log(p);
    }
    return std::max(h, 0.0);
}

double spectral_entropy(const Vector& x, const SpectralDecomposition& sd) {
    if (x.size() != sd.eigenvalues.size()) throw ConfigError("spectral_entropy: dimension mismatch");
    const Vector coeffs = sd.transform(x);
    std::vector<double> energies(static_cast<std::size_t>(coeffs.size()));
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) energies[static_cast<std::size_t>(i)] = coeffs(i) * coeffs(i);
    return normalized_entropy(energies);
}

namespace {

Vector kernel_response(const KernelFunction& kernel, const Vector& eigenvalues) {
    Vector g(eigenvalues.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = kernel(eigenvalues(i));
    return g;
}

}  // namespace

Vector exact_wavelet_transform(const Vector& x, const SpectralDecomposition& sd, const KernelFunction& kernel) {
    if (x.size() != sd.eigenvalues.size()) throw ConfigError("exact_wavelet_transform: dimension mismatch");
    const Vector g = kernel_response(kernel, sd.eigenvalues);
    return sd.eigenvectors * (g.asDiagonal() * sd.transform(x));
}

Matrix exact_wavelet_transform(const Matrix& z, const SpectralDecomposition& sd, const KernelFunction& kernel) {
    if (z.rows() != sd.eigenvalues.size()) throw ConfigError("exact_wavelet_transform: dimension mismatch");
    const Vector g = kernel_response(kernel, sd.eigenvalues);
    return sd.eigenvectors * (g.asDiagonal() * (sd.eigenvectors.transpose() * z));
}

std::vector<double> wavelet_energies(const Vector& x, const SpectralDecomposition& sd, const KernelSet& frame) {
    if (frame.empty()) throw ConfigError("wavelet frame is empty");
    if (x.size() != sd.eigenvalues.size()) throw ConfigError("wavelet_energies: dimension mismatch");
    const Vector coeffs = sd.transform(x);
    std::vector<double> energies;
    energies.reserve(frame.size());
    for (const auto& kernel : frame) {
        double e = 0.0;
        for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
            const double g = kernel(sd.eigenvalues(i));
            e += g * g * coeffs(i) * coeffs(i);
        }
        energies.push_back(e);
    }
    return energies;
}

double wavelet_entropy(const Vector& x, const SpectralDecomposition& sd, const KernelSet& frame) {
    return normalized_entropy(wavelet_energies(x, sd, frame));
}

CoverageCrossness coverage_crossness(const KernelSet& frame, const Vector& eigenvalues) {
    CoverageCrossness cc;
    cc.coverage.assign(frame.size(), 0);
    cc.crossness.assign(static_cast<std::size_t>(eigenvalues.size()), 0);
    for (std::size_t m = 0; m < frame.size(); ++m) {
        for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
            if (std::abs(frame[m](eigenvalues(i))) > kActivationThreshold) {
                ++cc.coverage[m];
                ++cc.crossness[static_cast<std::size_t>(i)];
            }
        }
    }
    return cc;
}

double approximation_bound(const KernelSet& frame, const Vector& eigenvalues) {
    const auto cc = coverage_crossness(frame, eigenvalues);
    int largest = 1;
    for (int c : cc.coverage) largest = std::max(largest, c);
    for (int r : cc.crossness) largest = std::max(largest, r);
    return std::log(static_cast<double>(largest));
}

double ParsevalResult::relative_gap() const {
    if (spectral_energy == 0.0) return wavelet_energy == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::abs(wavelet_energy - spectral_energy) / spectral_energy;
}

ParsevalResult parseval_check(const Vector& x, const SpectralDecomposition& sd, const KernelSet& frame) {
    ParsevalResult r;
    r.spectral_energy = sd.transform(x).squaredNorm();
    for (const auto& kernel : frame) r.wavelet_energy += exact_wavelet_transform(x, sd, kernel).squaredNorm();
    return r;
}

KernelSet disjoint_indicator_frame(const Vector& eigenvalues) {
    const auto n = eigenvalues.size();
    KernelSet frame;
    frame.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        // Half-open cell between midpoints to the neighbouring eigenvalues.
        const double lo = i == 0 ? -std::numeric_limits<double>::infinity()
                                 : 0.5 * (eigenvalues(i - 1) + eigenvalues(i));
        const double hi = i + 1 == n ? std::numeric_limits<double>::infinity()
                                     : 0.5 * (eigenvalues(i) + eigenvalues(i + 1));
        frame.push_back({static_cast<int>(i) + 1, [lo, hi](double l) { return l >= lo && l < hi ? 1.0 : 0.0; }});
    }
    return frame;
}

KernelSet all_pass_frame() { return {constant_kernel(1.0)}; }

SpectrumReport spectrum_report(const Vector& x, const SpectralDecomposition& sd, const KernelSet& frame) {
    SpectrumReport r;
    const Vector coeffs = sd.transform(x);
    r.spectral_energies.resize(static_cast<std::size_t>(coeffs.size()));
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
        r.spectral_energies[static_cast<std::size_t>(i)] = coeffs(i) * coeffs(i);
        r.total_energy += coeffs(i) * coeffs(i);
    }
    r.spectral_entropy = normalized_entropy(r.spectral_energies);
    r.wavelet_entropy = wavelet_entropy(x, sd, frame);
    auto cc = coverage_crossness(frame, sd.eigenvalues);
    r.coverage = std::move(cc.coverage);
    r.crossness = std::move(cc.crossness);
    r.bound = approximation_bound(frame, sd.eigenvalues);
    return r;
}

void to_json(nlohmann::json& j, const SpectrumReport& r) {
    j = nlohmann::json{{"spectral_energies", r.spectral_energies},
                       {"total_energy", r.total_energy},
                       {"spectral_entropy", r.spectral_entropy},
                       {"wavelet_entropy", r.wavelet_entropy},
                       {"coverage", r.coverage},
                       {"crossness", r.crossness},
                       {"bound", r.bound}};
}

}  // namespace megae::oracle
