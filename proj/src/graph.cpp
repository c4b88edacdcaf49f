#include "megae/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "megae/errors.hpp"
#include "megae/rng.hpp"

namespace megae {

Graph::Graph(int n_nodes, std::vector<Edge> edges) : n_nodes_(n_nodes), degree_(std::max(n_nodes, 0), 0) {
    if (n_nodes <= 0) throw DataError("graph must have at least one node");
    std::set<Edge> seen;
    edges_.reserve(edges.size());
    for (auto [u, v] : edges) {
        if (u < 0 || v < 0 || u >= n_nodes || v >= n_nodes) {
            throw DataError("edge (" + std::to_string(u) + ", " + std::to_string(v) + ") out of range for " +
                            std::to_string(n_nodes) + " nodes");
        }
        if (u == v) throw DataError("self-loop at node " + std::to_string(u));
        Edge e{std::min(u, v), std::max(u, v)};
        if (!seen.insert(e).second) {
            throw DataError("duplicate edge (" + std::to_string(e.first) + ", " + std::to_string(e.second) + ")");
        }
        edges_.push_back(e);
        ++degree_[e.first];
        ++degree_[e.second];
    }
}

Matrix Graph::dense_adjacency() const {
    Matrix a = Matrix::Zero(n_nodes_, n_nodes_);
    for (auto [u, v] : edges_) {
        a(u, v) = 1.0;
        a(v, u) = 1.0;
    }
    return a;
}

Laplacian normalized_laplacian(const Graph& g) {
    const int n = g.n_nodes();
    std::vector<double> inv_sqrt(n, 0.0);
    for (int i = 0; i < n; ++i) {
        if (g.degree()[i] > 0) inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degree()[i]));
    }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(n + 2 * g.n_edges());
    for (int i = 0; i < n; ++i) triplets.emplace_back(i, i, 1.0);
    for (auto [u, v] : g.edges()) {
        const double w = -inv_sqrt[u] * inv_sqrt[v];
        triplets.emplace_back(u, v, w);
        triplets.emplace_back(v, u, w);
    }
    SparseMatrix l(n, n);
    l.setFromTriplets(triplets.begin(), triplets.end());
    l.makeCompressed();
    return Laplacian(std::move(l));
}

Vector spmv(const Laplacian& l, const Vector& v) {
    if (v.size() != l.dimension()) {
        throw ConfigError("spmv: vector length " + std::to_string(v.size()) + " != Laplacian dimension " +
                          std::to_string(l.dimension()));
    }
    return l.entries() * v;
}

Matrix spmv(const Laplacian& l, const Matrix& z) {
    if (z.rows() != l.dimension()) {
        throw ConfigError("spmv: matrix rows " + std::to_string(z.rows()) + " != Laplacian dimension " +
                          std::to_string(l.dimension()));
    }
    return l.entries() * z;
}

Mechanism parse_mechanism(std::string_view name) {
    if (name == "mcar" || name == "MCAR") return Mechanism::MCAR;
    if (name == "mar" || name == "MAR") return Mechanism::MAR;
    if (name == "mnar" || name == "MNAR") return Mechanism::MNAR;
    throw ConfigError("unknown missingness mechanism '" + std::string(name) + "'");
}

std::string_view to_string(Mechanism m) {
    switch (m) {
        case Mechanism::MCAR: return "mcar";
        case Mechanism::MAR: return "mar";
        case Mechanism::MNAR: return "mnar";
    }
    return "mcar";
}

namespace {

// Finds a scale s such that mean(clamp(f(s, i))) hits target, f monotone in s.
template <typename ProbFn>
double bisect_rate(ProbFn prob_mean, double lo, double hi, double target) {
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (prob_mean(mid) < target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix bernoulli_mask(const Matrix& drop_prob, Rng& rng) {
    Matrix r(drop_prob.rows(), drop_prob.cols());
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.cols(); ++j) r(i, j) = rng.uniform() < drop_prob(i, j) ? 0.0 : 1.0;
    }
    return r;
}

Matrix mar_probabilities(const Matrix& x, double rate, Rng& rng) {
    const auto rows = x.rows();
    const auto cols = x.cols();
    Matrix p = Matrix::Zero(rows, cols);
    if (cols < 2) {
        p.setConstant(rate);
        return p;
    }
    std::vector<int> order(cols);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<int>(order));
    const int n_cond = std::max<int>(1, static_cast<int>(std::lround(0.3 * static_cast<double>(cols))));
    const int n_cond_clamped = std::min<int>(n_cond, static_cast<int>(cols) - 1);
    std::vector<int> cond(order.begin(), order.begin() + n_cond_clamped);
    std::vector<int> rest(order.begin() + n_cond_clamped, order.end());

    // Standardized conditioning values with random weights give one logit per row.
    Vector logit = Vector::Zero(rows);
    for (int c : cond) {
        const double mean = x.col(c).mean();
        const double sd = std::sqrt((x.col(c).array() - mean).square().mean());
        const double w = rng.normal();
        if (sd > 0.0) logit += w * ((x.col(c).array() - mean) / sd).matrix();
    }
    const double target = std::min(1.0, rate * static_cast<double>(cols) / static_cast<double>(rest.size()));
    auto mean_prob = [&](double shift) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < rows; ++i) s += sigmoid(logit(i) + shift);
        return s / static_cast<double>(rows);
    };
    const double shift = target >= 1.0 ? 50.0 : bisect_rate(mean_prob, -50.0, 50.0, target);
    for (int c : rest) {
        for (Eigen::Index i = 0; i < rows; ++i) p(i, c) = sigmoid(logit(i) + shift);
    }
    return p;
}

Matrix mnar_probabilities(const Matrix& x, double rate) {
    constexpr double kElevated = 3.0;
    const auto rows = x.rows();
    const auto cols = x.cols();
    Matrix weight(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        std::vector<double> column(x.col(c).data(), x.col(c).data() + rows);
        auto mid = column.begin() + static_cast<std::ptrdiff_t>(rows / 2);
        std::nth_element(column.begin(), mid, column.end());
        const double median = *mid;
        for (Eigen::Index i = 0; i < rows; ++i) weight(i, c) = x(i, c) > median ? kElevated : 1.0;
    }
    auto mean_prob = [&](double s) { return (s * weight.array()).min(1.0).mean(); };
    const double scale = bisect_rate(mean_prob, 0.0, 1.0, rate);
    return (scale * weight.array()).min(1.0).matrix();
}

}  // namespace

Matrix generate_mask(int rows, int cols, Mechanism mechanism, double rate, std::uint64_t seed,
                     const Matrix* values) {
    if (!(rate >= 0.0) || rate >= 1.0) throw ConfigError("missing rate must lie in [0, 1)");
    if (rows <= 0 || cols <= 0) throw ConfigError("mask shape must be positive");
    if (rate == 0.0) return Matrix::Ones(rows, cols);
    Rng rng(seed);
    switch (mechanism) {
        case Mechanism::MCAR: return bernoulli_mask(Matrix::Constant(rows, cols, rate), rng);
        case Mechanism::MAR:
        case Mechanism::MNAR: {
            if (values == nullptr || values->rows() != rows || values->cols() != cols) {
                throw ConfigError("MAR/MNAR masks need the feature values of matching shape");
            }
            const Matrix p = mechanism == Mechanism::MAR ? mar_probabilities(*values, rate, rng)
                                                         : mnar_probabilities(*values, rate);
            return bernoulli_mask(p, rng);
        }
    }
    return Matrix::Ones(rows, cols);
}

DatasetSplit split_dataset(int count, SplitProportions proportions, std::uint64_t seed) {
    const double total = proportions.train + proportions.val + proportions.test;
    if (proportions.train < 0 || proportions.val < 0 || proportions.test < 0 || std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("split proportions must be nonnegative and sum to 1");
    }
    if (count < 10) throw ConfigError("need at least 10 items to split, got " + std::to_string(count));
    const int n_train = static_cast<int>(std::lround(proportions.train * count));
    const int n_val = static_cast<int>(std::lround(proportions.val * count));
    const int n_test = count - n_train - n_val;
    if (n_train <= 0 || n_val <= 0 || n_test <= 0) {
        throw ConfigError("split of " + std::to_string(count) + " items leaves an empty set");
    }
    std::vector<int> perm(count);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    rng.shuffle(std::span<int>(perm));
    DatasetSplit split;
    split.seed = seed;
    split.train.assign(perm.begin(), perm.begin() + n_train);
    split.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
    split.test.assign(perm.begin() + n_train + n_val, perm.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

bool is_binary_mask(const Matrix& r) {
    return (r.array() == 0.0 || r.array() == 1.0).all();
}

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

Graph read_edge_list(const std::filesystem::path& path, int n_nodes) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open edge list " + path.string());
    std::vector<Graph::Edge> edges;
    int max_node = -1;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto tab = t.find('\t');
        int u = 0;
        int v = 0;
        if (tab == std::string::npos || !parse_number(std::string_view(t).substr(0, tab), u) ||
            !parse_number(std::string_view(t).substr(tab + 1), v)) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected \"u<TAB>v\"");
        }
        max_node = std::max({max_node, u, v});
        edges.emplace_back(u, v);
    }
    if (n_nodes < 0) n_nodes = max_node + 1;
    if (max_node >= n_nodes) {
        throw DataError(path.string() + ": node index " + std::to_string(max_node) + " exceeds node count " +
                        std::to_string(n_nodes));
    }
    try {
        return Graph(n_nodes, std::move(edges));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_edge_list(const std::filesystem::path& path, const Graph& g) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (auto [u, v] : g.edges()) out << u << '\t' << v << '\n';
}

Matrix read_csv_matrix(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(t);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            double v = 0.0;
            const std::string c = trim(cell);
            if (!parse_number(std::string_view(c), v) || !std::isfinite(v)) {
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad value '" + c + "'");
            }
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(rows.front().size()) + " columns, got " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(path.string() + ": empty matrix");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
}

void write_csv_matrix(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

}  // namespace megae
