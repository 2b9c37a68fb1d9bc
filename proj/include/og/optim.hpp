#pragma once

#include <cmath>

#include "og/errors.hpp"
#include "og/tensor.hpp"

namespace og {

// Per-parameter Adam accumulators. step counts updates applied so far.
struct AdamState {
    Tensor m;
    Tensor v;
    long step = 0;

    static AdamState for_param(const Tensor& p) {
        return AdamState{Tensor::zeros(p.shape), Tensor::zeros(p.shape), 0};
    }
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

inline void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr,
                      const AdamConfig& cfg = {}) {
    if (!param.same_shape(grad) || !param.same_shape(state.m) || !param.same_shape(state.v)) {
        throw DimensionError("adam_step shape mismatch: param " + param.shape_string() + ", grad " +
                             grad.shape_string());
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad.data[i];
        state.m.data[i] = cfg.beta1 * state.m.data[i] + (1.0 - cfg.beta1) * g;
        state.v.data[i] = cfg.beta2 * state.v.data[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = state.m.data[i] / bc1;
        const double vhat = state.v.data[i] / bc2;
        param.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

inline void sgd_step(Tensor& param, const Tensor& grad, double lr) {
    if (!param.same_shape(grad)) {
        throw DimensionError("sgd_step shape mismatch: param " + param.shape_string() + ", grad " +
                             grad.shape_string());
    }
    for (std::size_t i = 0; i < param.size(); ++i) param.data[i] -= lr * grad.data[i];
}

}  // namespace og
