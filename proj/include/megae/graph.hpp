#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace megae {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Simple undirected graph. Construction rejects self-loops, duplicate edges and
/// out-of-range endpoints.
class Graph {
public:
    using Edge = std::pair<int, int>;

    Graph() = default;
    Graph(int n_nodes, std::vector<Edge> edges);

    int n_nodes() const { return n_nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<int>& degree() const { return degree_; }
    std::size_t n_edges() const { return edges_.size(); }

    /// Dense 0/1 adjacency; test and oracle use only.
    Matrix dense_adjacency() const;

    bool operator==(const Graph&) const = default;

private:
    int n_nodes_ = 0;
    std::vector<Edge> edges_;  // each stored as (min, max)
    std::vector<int> degree_;
};

/// Symmetric normalized Laplacian I - D^{-1/2} A D^{-1/2}.
class Laplacian {
public:
    Laplacian() = default;
    explicit Laplacian(SparseMatrix entries) : entries_(std::move(entries)) {}

    int dimension() const { return static_cast<int>(entries_.rows()); }
    const SparseMatrix& entries() const { return entries_; }
    Matrix dense() const { return Matrix(entries_); }

private:
    SparseMatrix entries_;
};

/// Isolated nodes get D^{-1/2} = 0, so their row is an identity row.
Laplacian normalized_laplacian(const Graph& g);

/// y = L v. Throws ConfigError on dimension mismatch.
Vector spmv(const Laplacian& l, const Vector& v);

/// Y = L Z for every column of Z at once.
Matrix spmv(const Laplacian& l, const Matrix& z);

enum class Mechanism { MCAR, MAR, MNAR };

Mechanism parse_mechanism(std::string_view name);
std::string_view to_string(Mechanism m);

/// 0/1 observation pattern (1 = observed). Zero fraction targets `rate`.
/// MCAR: i.i.d. Bernoulli. MAR: logistic in fully observed conditioning columns.
/// MNAR: self-masking of above-median values. MAR/MNAR need `values`.
Matrix generate_mask(int rows, int cols, Mechanism mechanism, double rate, std::uint64_t seed,
                     const Matrix* values = nullptr);

struct DatasetSplit {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
    std::uint64_t seed = 0;
};

struct SplitProportions {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

/// Random permutation cut by rounding: n_train = round(p_train*n), n_val = round(p_val*n),
/// test takes the remainder.
DatasetSplit split_dataset(int count, SplitProportions proportions, std::uint64_t seed);

bool is_binary_mask(const Matrix& r);

// Edge-list: "u<TAB>v" per line, 0-indexed. Node count is max index + 1 unless given.
Graph read_edge_list(const std::filesystem::path& path, int n_nodes = -1);
void write_edge_list(const std::filesystem::path& path, const Graph& g);

// Headerless CSV, '.'-decimal.
Matrix read_csv_matrix(const std::filesystem::path& path);
void write_csv_matrix(const std::filesystem::path& path, const Matrix& m);

}  // namespace megae
