#pragma once

// Dense reference implementations of the spectral quantities. Everything here
// costs O(N^3) and exists to certify the polynomial fast path on small graphs.

#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "megae/graph.hpp"
#include "megae/kernel.hpp"

namespace megae::oracle {

/// |ĝ(λ)| above this counts as active for Coverage/Crossness.
inline constexpr double kActivationThreshold = 1e-9;
/// Entropies require ‖x‖² above this.
inline constexpr double kMinSignalEnergy = 1e-24;
inline constexpr int kMaxOracleNodes = 2048;

struct SpectralDecomposition {
    Vector eigenvalues;   // ascending
    Matrix eigenvectors;  // orthonormal columns

    /// Graph Fourier coefficients Uᵀx.
    Vector transform(const Vector& x) const { return eigenvectors.transpose() * x; }
};

SpectralDecomposition eigendecompose(const Laplacian& l);

/// Shannon entropy of the normalized distribution of `energies`, with 0·log 0 = 0.
/// Throws NumericalError when the total is not above kMinSignalEnergy.
double normalized_entropy(std::span<const double> energies);

double spectral_entropy(const Vector& x, const SpectralDecomposition& sd);

/// U ĝ(Λ) Uᵀ x.
Vector exact_wavelet_transform(const Vector& x, const SpectralDecomposition& sd, const KernelFunction& kernel);
Matrix exact_wavelet_transform(const Matrix& z, const SpectralDecomposition& sd, const KernelFunction& kernel);

/// Per-channel wavelet energies ‖U ĝ_m(Λ) Uᵀ x‖², evaluated as Σ_i ĝ_m(λ_i)² x̂_i²
/// (identical by orthonormality of U, and free of the back-transform rounding).
std::vector<double> wavelet_energies(const Vector& x, const SpectralDecomposition& sd, const KernelSet& frame);

double wavelet_entropy(const Vector& x, const SpectralDecomposition& sd, const KernelSet& frame);

struct CoverageCrossness {
    std::vector<int> coverage;   // per kernel
    std::vector<int> crossness;  // per eigenvalue
};

CoverageCrossness coverage_crossness(const KernelSet& frame, const Vector& eigenvalues);

/// max of log C_m and log R_i; kernels or eigenvalues with zero count are skipped.
double approximation_bound(const KernelSet& frame, const Vector& eigenvalues);

struct ParsevalResult {
    double wavelet_energy = 0.0;
    double spectral_energy = 0.0;

    double relative_gap() const;
};

/// Computes E_w from explicit transforms and E_s from the Fourier coefficients.
ParsevalResult parseval_check(const Vector& x, const SpectralDecomposition& sd, const KernelSet& frame);

/// M = N kernels, kernel i an indicator of a neighbourhood of λ_i that excludes
/// every other distinct eigenvalue.
KernelSet disjoint_indicator_frame(const Vector& eigenvalues);

/// The single kernel ĝ ≡ 1.
KernelSet all_pass_frame();

struct SpectrumReport {
    std::vector<double> spectral_energies;
    double total_energy = 0.0;
    double spectral_entropy = 0.0;
    double wavelet_entropy = 0.0;
    std::vector<int> coverage;
    std::vector<int> crossness;
    double bound = 0.0;
};

SpectrumReport spectrum_report(const Vector& x, const SpectralDecomposition& sd, const KernelSet& frame);

void to_json(nlohmann::json& j, const SpectrumReport& r);

}  // namespace megae::oracle
