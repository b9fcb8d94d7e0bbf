#include "jumplab/numeric.hpp"

#include <algorithm>
#include <fmt/format.h>

namespace jumplab {

std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
    return fmt::format("{}x{}", rows, cols);
}

ActivationKind parse_activation(std::string_view name) {
    if (name == "relu") return ActivationKind::relu;
    if (name == "tanh") return ActivationKind::tanh;
    if (name == "sigmoid") return ActivationKind::sigmoid;
    fail(ErrorKind::config, fmt::format("unknown activation '{}'", name));
}

std::string_view to_string(ActivationKind kind) noexcept {
    switch (kind) {
        case ActivationKind::relu: return "relu";
        case ActivationKind::tanh: return "tanh";
        case ActivationKind::sigmoid: return "sigmoid";
    }
    return "unknown";
}

GradientCheckResult finite_difference_check(
    const std::function<double(const std::vector<Matrix>&)>& loss,
    std::vector<Matrix> params,
    const std::vector<Matrix>& analytic,
    double epsilon) {
    if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
        fail(ErrorKind::config,
             fmt::format("finite_difference_check: epsilon {} outside [1e-7, 1e-3]", epsilon));
    }
    if (analytic.size() != params.size()) {
        fail(ErrorKind::shape, "finite_difference_check: gradient list length differs from params");
    }
    GradientCheckResult result;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Matrix& theta = params[p];
        if (analytic[p].rows() != theta.rows() || analytic[p].cols() != theta.cols()) {
            fail(ErrorKind::shape,
                 fmt::format("finite_difference_check: gradient {} is {} but parameter is {}", p,
                             shape_string(analytic[p].rows(), analytic[p].cols()),
                             shape_string(theta.rows(), theta.cols())));
        }
        for (Eigen::Index r = 0; r < theta.rows(); ++r) {
            for (Eigen::Index c = 0; c < theta.cols(); ++c) {
                const double saved = theta(r, c);
                theta(r, c) = saved + epsilon;
                const double up = loss(params);
                theta(r, c) = saved - epsilon;
                const double down = loss(params);
                theta(r, c) = saved;
                if (!std::isfinite(up) || !std::isfinite(down)) {
                    fail(ErrorKind::numeric,
                         fmt::format("finite_difference_check: non-finite loss at param {} ({}, {})",
                                     p, r, c));
                }
                const double numeric = (up - down) / (2.0 * epsilon);
                const double exact = analytic[p](r, c);
                const double denom =
                    std::max({std::abs(numeric), std::abs(exact), kGradientCompareFloor});
                const double rel = std::abs(numeric - exact) / denom;
                if (rel > result.max_rel_error) result = {rel, p, r, c};
            }
        }
    }
    return result;
}

}  // namespace jumplab
