#pragma once

#include <cmath>
#include <string>

#include "og/errors.hpp"
#include "og/tensor.hpp"

namespace og {

// Temperature-scaled softmax over a 2-logit vector. Numerically stable via
// max subtraction; components sum to 1 up to rounding for any finite input.
inline Tensor softmax_probability(const Tensor& s, double temperature) {
    if (s.rank() != 1 || s.shape[0] != 2) {
        throw DimensionError("softmax_probability expects a 2-logit vector, got " +
                             s.shape_string());
    }
    if (!(temperature > 0.0)) {
        throw InvariantError("temperature must be positive, got " + std::to_string(temperature));
    }
    const double a = s.data[0] / temperature;
    const double b = s.data[1] / temperature;
    const double m = a > b ? a : b;
    const double ea = std::exp(a - m);
    const double eb = std::exp(b - m);
    const double z = ea + eb;
    return Tensor::vector({ea / z, eb / z});
}

// -log p(label) on an already-normalized 2-class distribution, clamped so a
// saturated probability never produces an infinite loss.
inline double cross_entropy_loss(const Tensor& probabilities, std::size_t label) {
    if (probabilities.rank() != 1 || probabilities.shape[0] != 2) {
        throw DimensionError("cross_entropy_loss expects a 2-probability vector, got " +
                             probabilities.shape_string());
    }
    if (label >= 2) {
        throw InvariantError("cross_entropy_loss label must be 0 or 1, got " +
                             std::to_string(label));
    }
    const double p = probabilities.data[label];
    return -std::log(p > 1e-12 ? p : 1e-12);
}

}  // namespace og
