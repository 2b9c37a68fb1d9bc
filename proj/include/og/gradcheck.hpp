#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "og/errors.hpp"

namespace og {

// Central finite difference of a scalar function along one coordinate,
// perturbing the coordinate in place and restoring it afterwards.
inline double central_difference(const std::function<double()>& eval, double& coord,
                                 double h = 1e-6) {
    const double saved = coord;
    coord = saved + h;
    const double fp = eval();
    coord = saved - h;
    const double fm = eval();
    coord = saved;
    return (fp - fm) / (2.0 * h);
}

// Collects analytic-vs-numeric gradient comparisons and tracks the worst
// offender. The denominator mixes absolute and relative error so that tiny
// gradients are judged on absolute terms instead of blowing up the ratio.
struct GradCheck {
    double tolerance;
    double max_rel_err = 0.0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::string worst_coordinate;
    std::size_t checked = 0;

    explicit GradCheck(double tol) : tolerance(tol) {}

    void compare(double analytic, double numeric, const std::string& coordinate) {
        const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
        const double rel = std::fabs(analytic - numeric) / denom;
        ++checked;
        if (rel > max_rel_err) {
            max_rel_err = rel;
            worst_analytic = analytic;
            worst_numeric = numeric;
            worst_coordinate = coordinate;
        }
    }

    bool pass() const { return max_rel_err < tolerance; }

    void require_pass() const {
        if (!pass()) {
            throw InvariantError("gradient check failed at " + worst_coordinate + ": analytic " +
                                 std::to_string(worst_analytic) + " vs numeric " +
                                 std::to_string(worst_numeric) + " (rel err " +
                                 std::to_string(max_rel_err) + ", tolerance " +
                                 std::to_string(tolerance) + ")");
        }
    }
};

}  // namespace og
