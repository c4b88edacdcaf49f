#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "megae/dataset.hpp"
#include "megae/model.hpp"
#include "megae/wavelet_frame.hpp"

namespace megae {

struct ExperimentConfig {
    TrainConfig train;
    int grid = 2000;              // polynomial fitting grid
    double regularization = 1e-2; // for the regularized inverse policy
    Mechanism mechanism = Mechanism::MCAR;
    double rate = 0.1;
    int trials = 5;
    std::uint64_t seed = 0;
    int knn_k = 5;
    bool ablation_no_entropy = false;  // also train a gamma = 0 twin per trial
    int certify_graphs = 20;
    int certify_signals = 100;
    int jobs = 1;  // trials run as independent jobs; results are assembled in trial order

    FrameSpec frame() const { return FrameSpec::with_channels(train.channels); }
    FilterBankOptions filter_options() const;
    void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);

struct MethodScore {
    double rmse = 0.0;
    double entropy_mean = 0.0;       // mean spectral entropy of imputed test columns
    double entropy_abs_dev = 0.0;    // mean |ξ(imputed) - ξ(truth)| per column
};

struct VariantOutcome {
    TrainResult training;
    MethodScore score;
};

struct TrialOutcome {
    int trial = 0;
    std::uint64_t seed = 0;
    DatasetSplit split;
    long hidden_entries = 0;
    double truth_entropy_mean = 0.0;
    VariantOutcome megae;
    std::optional<VariantOutcome> no_entropy;
    MethodScore mean;
    MethodScore knn;
    long knn_fallbacks = 0;
    long mean_empty_columns = 0;
    double seconds = 0.0;  // wall clock; kept out of the report
};

struct ExperimentResult {
    ExperimentConfig config;
    FilterBank bank;
    std::vector<TrialOutcome> trials;
    nlohmann::json certificates;
    nlohmann::json report;   // deterministic: recomputable from config, seed and data
    nlohmann::json timings;  // wall clock only
};

/// Oracle checks of energy preservation and the entropy bound on small graphs:
/// exact kernels, fitted filters, and filter-vs-oracle agreement.
nlohmann::json certify(const std::vector<const Graph*>& graphs, const WaveletFrame& frame, const FilterBank& bank,
                       int signals, std::uint64_t seed);

/// Random small graphs used when no dataset is given.
std::vector<Graph> certification_graphs(int count, int max_nodes, std::uint64_t seed);

ExperimentResult run_experiment(const Dataset& dataset, const ExperimentConfig& config);

/// report.json, trials.csv, trace.csv, timings.json and one checkpoint per trial.
void write_experiment(const ExperimentResult& result, const std::filesystem::path& dir);

struct SweepPoint {
    int channels = 0;
    double gamma = 0.0;
    std::optional<double> mean_rmse;  // empty when the point failed
    std::string error;
};

/// One experiment per (M, gamma); writes each report under dir/M<M>_gamma<g>/ and
/// summary.csv into dir. Failed points are logged and skipped.
std::vector<SweepPoint> sweep(const Dataset& dataset, const ExperimentConfig& base, const std::vector<int>& channels,
                              const std::vector<double>& gammas, const std::filesystem::path& dir);

/// Compact human-readable summary of a report.json document.
std::string summarize_report(const nlohmann::json& report);

/// Shortest round-trip decimal form, as used in every CSV written here.
std::string format_double(double v);

}  // namespace megae
