#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "megae/graph.hpp"

namespace megae {

struct GraphRecord {
    std::string name;
    Graph graph;
    Matrix features;  // n_nodes x d_features

    bool operator==(const GraphRecord& o) const {
        return name == o.name && graph == o.graph && features.rows() == o.features.rows() &&
               features.cols() == o.features.cols() && features == o.features;
    }
};

struct Dataset {
    std::vector<GraphRecord> graphs;

    int d_features() const { return graphs.empty() ? 0 : static_cast<int>(graphs.front().features.cols()); }
    std::size_t total_nodes() const;
    bool single_graph() const { return graphs.size() == 1; }
};

/// Manifest: one "edges<TAB>features" line per graph; paths relative to the
/// manifest's directory; blank lines and lines starting with '#' are skipped.
Dataset load_dataset(const std::filesystem::path& manifest);

/// Writes edge lists, feature CSVs and manifest.tsv into `dir`; returns the manifest path.
std::filesystem::path save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

struct SyntheticSpec {
    int graphs = 200;
    int min_nodes = 10;
    int max_nodes = 60;
    double mean_degree = 4.0;
    int features = 8;
    int shared_factors = 2;          // low-rank signals mixed into every column
    double shared_fraction = 0.5;    // energy share of the shared part per column
    double high_frequency_share = 0.25;  // energy share above λ = 1 per column
    double smoothness = 3.0;         // low band amplitude exp(-smoothness·λ)
    double noise = 0.01;
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticSpec& s);
void from_json(const nlohmann::json& j, SyntheticSpec& s);

/// Random connected graphs carrying features that mix smooth and high-frequency
/// Laplacian eigencomponents. Deterministic in the spec (including seed).
Dataset synthesize(const SyntheticSpec& spec);

/// Per-column affine map to [0, 1] fitted on the observed entries.
struct MinMaxScaler {
    Vector minimum;
    Vector range;

    static MinMaxScaler fit(const std::vector<const Matrix*>& values, const std::vector<const Matrix*>& masks = {});
    Matrix transform(const Matrix& x) const;
    Matrix inverse(const Matrix& x) const;
};

}  // namespace megae
