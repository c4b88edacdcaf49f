#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace megae {

/// A spectral kernel ĝ(λ), evaluable on [0, spectrum bound].
struct KernelFunction {
    int channel = 1;  // 1-based channel index
    std::function<double(double)> eval;

    double operator()(double lambda) const { return eval(lambda); }
};

using KernelSet = std::vector<KernelFunction>;

inline KernelFunction constant_kernel(double value, int channel = 1) {
    return {channel, [value](double) { return value; }};
}

}  // namespace megae
