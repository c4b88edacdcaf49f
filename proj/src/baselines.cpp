#include "megae/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "megae/errors.hpp"

namespace megae {

namespace {

void check_shapes(const Matrix& x, const Matrix& r) {
    if (x.rows() != r.rows() || x.cols() != r.cols()) throw ConfigError("feature and mask shapes differ");
    if (!is_binary_mask(r)) throw ConfigError("mask must be 0/1");
}

Vector observed_means(const Matrix& x, const Matrix& r, long* empty) {
    Vector means(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double n = r.col(c).sum();
        if (n > 0.0) {
            means(c) = x.col(c).cwiseProduct(r.col(c)).sum() / n;
        } else {
            means(c) = 0.0;
            if (empty) ++*empty;
        }
    }
    return means;
}

}  // namespace

Matrix baseline_mean(const Matrix& x, const Matrix& r, BaselineStats* stats) {
    check_shapes(x, r);
    const Vector means = observed_means(x, r, stats ? &stats->empty_columns : nullptr);
    Matrix out = x;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            if (r(i, c) == 0.0) out(i, c) = means(c);
        }
    }
    return out;
}

Matrix baseline_knn(const Matrix& x, const Matrix& r, int k, BaselineStats* stats) {
    check_shapes(x, r);
    if (k < 1) throw ConfigError("knn needs k >= 1");
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    const Vector means = observed_means(x, r, nullptr);
    Matrix out = x;
    std::vector<double> dist(static_cast<std::size_t>(n));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    const double inf = std::numeric_limits<double>::infinity();

    for (Eigen::Index i = 0; i < n; ++i) {
        if (r.row(i).minCoeff() != 0.0) continue;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) {
                dist[static_cast<std::size_t>(j)] = inf;
                continue;
            }
            double sq = 0.0;
            int co = 0;
            for (Eigen::Index c = 0; c < d; ++c) {
                if (r(i, c) != 0.0 && r(j, c) != 0.0) {
                    const double diff = x(i, c) - x(j, c);
                    sq += diff * diff;
                    ++co;
                }
            }
            dist[static_cast<std::size_t>(j)] = co ? std::sqrt(sq * static_cast<double>(d) / co) : inf;
        }
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(), [&dist](Eigen::Index a, Eigen::Index b) {
            return dist[static_cast<std::size_t>(a)] < dist[static_cast<std::size_t>(b)];
        });

        for (Eigen::Index c = 0; c < d; ++c) {
            if (r(i, c) != 0.0) continue;
            double num = 0.0;
            double den = 0.0;
            double exact_sum = 0.0;
            int exact = 0;
            int taken = 0;
            for (Eigen::Index j : order) {
                const double dj = dist[static_cast<std::size_t>(j)];
                if (taken == k || dj == inf) break;
                if (r(j, c) == 0.0) continue;
                ++taken;
                if (dj == 0.0) {
                    exact_sum += x(j, c);
                    ++exact;
                } else {
                    num += x(j, c) / dj;
                    den += 1.0 / dj;
                }
            }
            if (exact > 0) {
                out(i, c) = exact_sum / exact;
            } else if (taken > 0) {
                out(i, c) = num / den;
            } else {
                out(i, c) = means(c);
                if (stats) ++stats->mean_fallbacks;
            }
        }
    }
    return out;
}

double rmse(const Matrix& imputed, const Matrix& truth, const Matrix& r) {
    if (imputed.rows() != truth.rows() || imputed.cols() != truth.cols() || r.rows() != truth.rows() ||
        r.cols() != truth.cols()) {
        throw ConfigError("rmse operands differ in shape");
    }
    const Matrix hidden = (1.0 - r.array()).matrix();
    const double count = hidden.sum();
    if (count <= 0.0) throw DataError("rmse needs at least one hidden entry");
    return std::sqrt(((imputed - truth).array().square() * hidden.array()).sum() / count);
}

}  // namespace megae
