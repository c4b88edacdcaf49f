#pragma once

#include "megae/graph.hpp"

namespace megae {

/// Counts of entries that could not be imputed the intended way.
struct BaselineStats {
    long empty_columns = 0;     // mean: columns with nothing observed, imputed as 0
    long mean_fallbacks = 0;    // knn: entries with no candidate neighbor
};

/// Hidden entries (R = 0) get their column's observed mean.
Matrix baseline_mean(const Matrix& x, const Matrix& r, BaselineStats* stats = nullptr);

/// Hidden entry = inverse-distance-weighted average over the k nearest rows that
/// observe it. Distance is Euclidean over co-observed columns scaled by
/// sqrt(D / #co-observed). Rows at distance zero take precedence and are averaged.
Matrix baseline_knn(const Matrix& x, const Matrix& r, int k, BaselineStats* stats = nullptr);

/// sqrt(mean over R = 0 of squared error). DataError if nothing is hidden.
double rmse(const Matrix& imputed, const Matrix& truth, const Matrix& r);

}  // namespace megae
