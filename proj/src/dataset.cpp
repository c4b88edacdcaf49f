#include "megae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "megae/errors.hpp"
#include "megae/rng.hpp"
#include "megae/spectral_oracle.hpp"

namespace megae {

std::size_t Dataset::total_nodes() const {
    std::size_t n = 0;
    for (const auto& g : graphs) n += static_cast<std::size_t>(g.graph.n_nodes());
    return n;
}

Dataset load_dataset(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw DataError("cannot open manifest " + manifest.string());
    const auto base = manifest.parent_path();
    Dataset ds;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError(manifest.string() + ":" + std::to_string(line_no) + ": expected \"edges<TAB>features\"");
        }
        const std::filesystem::path edges = base / line.substr(0, tab);
        const std::filesystem::path features = base / line.substr(tab + 1);
        GraphRecord rec;
        rec.name = std::filesystem::path(line.substr(0, tab)).stem().string();
        rec.features = read_csv_matrix(features);
        rec.graph = read_edge_list(edges, static_cast<int>(rec.features.rows()));
        if (!ds.graphs.empty() && rec.features.cols() != ds.graphs.front().features.cols()) {
            throw DataError(manifest.string() + ":" + std::to_string(line_no) + ": graph has " +
                            std::to_string(rec.features.cols()) + " feature columns, expected " +
                            std::to_string(ds.graphs.front().features.cols()));
        }
        ds.graphs.push_back(std::move(rec));
    }
    if (ds.graphs.empty()) throw DataError("no graphs in manifest " + manifest.string());
    return ds;
}

std::filesystem::path save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto manifest = dir / "manifest.tsv";
    std::ofstream out(manifest, std::ios::binary);
    if (!out) throw DataError("cannot write " + manifest.string());
    for (const auto& g : dataset.graphs) {
        const std::string edges = g.name + ".edges";
        const std::string feats = g.name + ".features.csv";
        write_edge_list(dir / edges, g.graph);
        write_csv_matrix(dir / feats, g.features);
        out << edges << '\t' << feats << '\n';
    }
    return manifest;
}

void SyntheticSpec::validate() const {
    if (graphs < 1) throw ConfigError("synthetic spec needs at least one graph");
    if (min_nodes < 2 || max_nodes < min_nodes) throw ConfigError("synthetic node range must satisfy 2 <= min <= max");
    if (features < 1) throw ConfigError("synthetic spec needs at least one feature");
    if (shared_factors < 0) throw ConfigError("shared factor count must be nonnegative");
    if (shared_fraction < 0.0 || shared_fraction > 1.0) throw ConfigError("shared fraction must lie in [0, 1]");
    if (high_frequency_share < 0.0 || high_frequency_share >= 1.0) throw ConfigError("high-frequency share must lie in [0, 1)");
    if (mean_degree < 0.0 || noise < 0.0 || smoothness < 0.0) throw ConfigError("synthetic spec has a negative parameter");
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
    j = nlohmann::json{{"graphs", s.graphs},
                       {"min_nodes", s.min_nodes},
                       {"max_nodes", s.max_nodes},
                       {"mean_degree", s.mean_degree},
                       {"features", s.features},
                       {"shared_factors", s.shared_factors},
                       {"shared_fraction", s.shared_fraction},
                       {"high_frequency_share", s.high_frequency_share},
                       {"smoothness", s.smoothness},
                       {"noise", s.noise},
                       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
    s.graphs = j.value("graphs", s.graphs);
    s.min_nodes = j.value("min_nodes", s.min_nodes);
    s.max_nodes = j.value("max_nodes", s.max_nodes);
    s.mean_degree = j.value("mean_degree", s.mean_degree);
    s.features = j.value("features", s.features);
    s.shared_factors = j.value("shared_factors", s.shared_factors);
    s.shared_fraction = j.value("shared_fraction", s.shared_fraction);
    s.high_frequency_share = j.value("high_frequency_share", s.high_frequency_share);
    s.smoothness = j.value("smoothness", s.smoothness);
    s.noise = j.value("noise", s.noise);
    s.seed = j.value("seed", s.seed);
}

namespace {

// Random spanning tree plus Erdős–Rényi extras, so every graph is connected.
Graph random_connected_graph(int n, double mean_degree, Rng& rng) {
    std::set<Graph::Edge> edges;
    for (int i = 1; i < n; ++i) {
        const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i)));
        edges.insert({j, i});
    }
    const double tree_degree = 2.0 * (n - 1) / n;
    const double p = n > 1 ? std::clamp((mean_degree - tree_degree) / (n - 1), 0.0, 1.0) : 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (rng.uniform() < p) edges.insert({i, j});
        }
    }
    return Graph(n, std::vector<Graph::Edge>(edges.begin(), edges.end()));
}

struct BandSignal {
    Vector low;
    Vector high;
};

BandSignal random_band_signal(const oracle::SpectralDecomposition& sd, double smoothness, Rng& rng) {
    const auto n = sd.eigenvalues.size();
    Vector low_coeffs = Vector::Zero(n);
    Vector high_coeffs = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double lambda = sd.eigenvalues(i);
        const double z = rng.normal();
        if (lambda > 1.0) high_coeffs(i) = z;
        else low_coeffs(i) = z * std::exp(-smoothness * lambda);
    }
    return {sd.eigenvectors * low_coeffs, sd.eigenvectors * high_coeffs};
}

}  // namespace

Dataset synthesize(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    Matrix mixing(std::max(spec.shared_factors, 1), spec.features);
    for (Eigen::Index i = 0; i < mixing.rows(); ++i) {
        for (Eigen::Index j = 0; j < mixing.cols(); ++j) mixing(i, j) = rng.normal();
    }
    Vector column_offset(spec.features);
    for (int c = 0; c < spec.features; ++c) column_offset(c) = rng.normal();

    Dataset ds;
    const int width = static_cast<int>(std::to_string(std::max(spec.graphs - 1, 0)).size());
    for (int gi = 0; gi < spec.graphs; ++gi) {
        const int n = spec.min_nodes + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_nodes - spec.min_nodes + 1)));
        GraphRecord rec;
        char name[32];
        std::snprintf(name, sizeof(name), "graph_%0*d", width, gi);
        rec.name = name;
        rec.graph = random_connected_graph(n, spec.mean_degree, rng);
        const auto sd = oracle::eigendecompose(normalized_laplacian(rec.graph));

        std::vector<BandSignal> shared;
        for (int f = 0; f < spec.shared_factors; ++f) shared.push_back(random_band_signal(sd, spec.smoothness, rng));

        rec.features.resize(n, spec.features);
        for (int c = 0; c < spec.features; ++c) {
            const BandSignal own = random_band_signal(sd, spec.smoothness, rng);
            Vector low = Vector::Zero(n);
            Vector high = Vector::Zero(n);
            for (int f = 0; f < spec.shared_factors; ++f) {
                low += mixing(f, c) * shared[static_cast<std::size_t>(f)].low;
                high += mixing(f, c) * shared[static_cast<std::size_t>(f)].high;
            }
            // Blend shared and own parts at the requested energy ratio, band by band.
            auto blend = [&](const Vector& common, const Vector& mine) {
                const double ec = common.squaredNorm();
                const double em = mine.squaredNorm();
                if (spec.shared_factors == 0 || ec == 0.0) return Vector(mine);
                if (em == 0.0) return Vector(common);
                return Vector(std::sqrt(spec.shared_fraction / ec) * common +
                              std::sqrt((1.0 - spec.shared_fraction) / em) * mine);
            };
            low = blend(low, own.low);
            high = blend(high, own.high);
            // Fix the high-band share exactly (bands are orthogonal).
            const double el = low.squaredNorm();
            const double eh = high.squaredNorm();
            if (eh > 0.0 && el > 0.0) {
                high *= std::sqrt(spec.high_frequency_share / (1.0 - spec.high_frequency_share) * el / eh);
            }
            Vector col = low + high;
            const double scale = 1.0 / std::sqrt(std::max(col.squaredNorm() / n, 1e-300));
            col *= scale;
            for (int i = 0; i < n; ++i) col(i) += spec.noise * rng.normal();
            rec.features.col(c) = col;
        }
        ds.graphs.push_back(std::move(rec));
    }
    return ds;
}

MinMaxScaler MinMaxScaler::fit(const std::vector<const Matrix*>& values, const std::vector<const Matrix*>& masks) {
    if (values.empty()) throw ConfigError("scaler needs data");
    const auto d = values.front()->cols();
    MinMaxScaler s;
    s.minimum = Vector::Constant(d, std::numeric_limits<double>::infinity());
    Vector maximum = Vector::Constant(d, -std::numeric_limits<double>::infinity());
    for (std::size_t g = 0; g < values.size(); ++g) {
        const Matrix& x = *values[g];
        const Matrix* r = masks.empty() ? nullptr : masks[g];
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            for (Eigen::Index c = 0; c < d; ++c) {
                if (r && (*r)(i, c) == 0.0) continue;
                s.minimum(c) = std::min(s.minimum(c), x(i, c));
                maximum(c) = std::max(maximum(c), x(i, c));
            }
        }
    }
    s.range.resize(d);
    for (Eigen::Index c = 0; c < d; ++c) {
        if (!std::isfinite(s.minimum(c))) {
            s.minimum(c) = 0.0;
            maximum(c) = 1.0;
        }
        const double r = maximum(c) - s.minimum(c);
        s.range(c) = r > 0.0 ? r : 1.0;
    }
    return s;
}

Matrix MinMaxScaler::transform(const Matrix& x) const {
    return ((x.rowwise() - minimum.transpose()).array().rowwise() / range.transpose().array()).matrix();
}

Matrix MinMaxScaler::inverse(const Matrix& x) const {
    return ((x.array().rowwise() * range.transpose().array()).rowwise() + minimum.transpose().array()).matrix();
}

}  // namespace megae
