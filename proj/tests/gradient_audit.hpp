#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "megae/model.hpp"

namespace megae::testkit {

struct AuditResult {
    int probed = 0;
    int agreed = 0;
    int kinks = 0;        // coordinates skipped because ±h crosses a leaky-ReLU kink
    double worst = 0.0;   // largest relative error among agreeing-or-not smooth probes
    std::vector<int> per_tensor_probed;
};

inline std::vector<Matrix> preactivations(const ModelParams& p, const FilterBank& bank, const GraphBatch& b) {
    const Matrix xm = (b.x.array() * b.input_mask.array()).matrix();
    const ForwardCache c = forward(p, *b.laplacian, bank, xm);
    std::vector<Matrix> out;
    for (const auto* group : {&c.p1, &c.p2, &c.p3}) out.insert(out.end(), group->begin(), group->end());
    out.push_back(c.p4);
    return out;
}

inline bool same_signs(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (((a[i].array() > 0.0) != (b[i].array() > 0.0)).any()) return false;
    }
    return true;
}

/// Central differences with step h on `per_tensor` random coordinates of every tensor.
/// Agreement: |fd - an| <= rel * max(|fd|, |an|) + abs_floor.
inline AuditResult gradient_audit(const ModelParams& params, const FilterBank& bank, const GraphBatch& batch, double gamma,
                                  ReconstructionLossKind kind, int per_tensor, unsigned seed, double h = 1e-5,
                                  double rel = 1e-3, double abs_floor = 1e-8) {
    const ModelParams analytic = gradients(params, bank, batch, gamma, kind);
    std::vector<const Matrix*> grads;
    analytic.for_each([&grads](const Matrix& g) { grads.push_back(&g); });
    const auto base_signs = preactivations(params, bank, batch);
    std::mt19937 gen(seed);
    AuditResult res;
    ModelParams probe = params;
    std::vector<Matrix*> tensors;
    probe.for_each([&tensors](Matrix& w) { tensors.push_back(&w); });
    for (std::size_t t = 0; t < tensors.size(); ++t) {
        Matrix& w = *tensors[t];
        std::uniform_int_distribution<Eigen::Index> pick(0, w.size() - 1);
        int probed_here = 0;
        for (int k = 0; k < per_tensor; ++k) {
            const Eigen::Index idx = pick(gen);
            double& v = w.data()[idx];
            const double orig = v;
            v = orig + h;
            const bool plus_ok = same_signs(base_signs, preactivations(probe, bank, batch));
            const double lp = evaluate_loss(probe, bank, batch, gamma, kind).total;
            v = orig - h;
            const bool minus_ok = same_signs(base_signs, preactivations(probe, bank, batch));
            const double lm = evaluate_loss(probe, bank, batch, gamma, kind).total;
            v = orig;
            if (!plus_ok || !minus_ok) {
                ++res.kinks;
                continue;
            }
            const double fd = (lp - lm) / (2.0 * h);
            const double an = grads[t]->data()[idx];
            const double err = std::abs(fd - an);
            const double scale = std::max(std::abs(fd), std::abs(an));
            ++res.probed;
            ++probed_here;
            if (err <= rel * scale + abs_floor) ++res.agreed;
            if (scale > 0.0) res.worst = std::max(res.worst, err / (scale + abs_floor / rel));
        }
        res.per_tensor_probed.push_back(probed_here);
    }
    return res;
}

}  // namespace megae::testkit
