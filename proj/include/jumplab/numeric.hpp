#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "jumplab/error.hpp"

namespace jumplab {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

std::string shape_string(Eigen::Index rows, Eigen::Index cols);

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
    return m.allFinite();
}

/// Product a * b with a shape check and a finiteness check on the result.
/// Computed one row at a time so a row's result never depends on its batch.
template <typename A, typename B>
MatrixX<typename A::Scalar> matmul(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    if (a.cols() != b.rows()) {
        fail(ErrorKind::shape, "matmul: cannot multiply " + shape_string(a.rows(), a.cols()) +
                                   " by " + shape_string(b.rows(), b.cols()));
    }
    MatrixX<typename A::Scalar> out(a.rows(), b.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) out.row(r).noalias() = a.row(r) * b;
    if (!out.allFinite()) fail(ErrorKind::numeric, "matmul: non-finite entry in product");
    return out;
}

/// Applies f to every row through an aligned temporary. Vectorized
/// transcendentals peel a different number of scalars on misaligned rows, so
/// working in place would make a row's result depend on its position.
template <typename Scalar, typename F>
void for_each_row(MatrixX<Scalar>& m, F&& f) {
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> row(m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        row = m.row(r);
        f(row);
        m.row(r) = row;
    }
}

enum class ActivationKind { relu, tanh, sigmoid };

ActivationKind parse_activation(std::string_view name);
std::string_view to_string(ActivationKind kind) noexcept;

template <typename Scalar>
struct Activated {
    MatrixX<Scalar> value;
    MatrixX<Scalar> derivative;
};

/// Elementwise activation and its derivative at x. relu'(0) is taken as 0.
template <typename Derived>
Activated<typename Derived::Scalar> activation(ActivationKind kind,
                                               const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    Activated<Scalar> out;
    switch (kind) {
        case ActivationKind::relu:
            out.value = x.cwiseMax(Scalar(0));
            out.derivative = (x.array() > Scalar(0)).template cast<Scalar>().matrix();
            break;
        case ActivationKind::tanh:
            out.value = x.array().tanh().matrix();
            out.derivative = (Scalar(1) - out.value.array().square()).matrix();
            break;
        case ActivationKind::sigmoid:
            out.value = (Scalar(1) / (Scalar(1) + (-x.array()).exp())).matrix();
            out.derivative = (out.value.array() * (Scalar(1) - out.value.array())).matrix();
            break;
    }
    return out;
}

/// Row-wise softmax of logits / temperature with max subtraction.
template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits,
                                               typename Derived::Scalar temperature) {
    using Scalar = typename Derived::Scalar;
    if (!(temperature > Scalar(0))) {
        fail(ErrorKind::config, "softmax: temperature must be positive");
    }
    MatrixX<Scalar> out = logits / temperature;
    for_each_row(out, [](auto& row) {
        row.array() -= row.maxCoeff();
        row = row.array().exp().matrix();
        row /= row.sum();
    });
    return out;
}

template <typename Derived>
VectorX<typename Derived::Scalar> softmax_with_temperature(const Eigen::MatrixBase<Derived>& logits,
                                                           typename Derived::Scalar temperature) {
    using Scalar = typename Derived::Scalar;
    if (!logits.allFinite()) fail(ErrorKind::numeric, "softmax: non-finite logits");
    const MatrixX<Scalar> row = logits.transpose().reshaped(1, logits.size());
    return softmax_rows(row, temperature).transpose();
}

/// Index of the largest entry; the lowest index wins ties.
template <typename Derived>
Eigen::Index argmax(const Eigen::MatrixBase<Derived>& v) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v(i) > v(best)) best = i;
    }
    return best;
}

struct GradientCheckResult {
    double max_rel_error = 0.0;
    std::size_t param_index = 0;
    Eigen::Index row = 0;
    Eigen::Index col = 0;
};

/// Coordinates where both gradients are smaller than this are compared on an
/// absolute scale of this size rather than relative to their own magnitude.
inline constexpr double kGradientCompareFloor = 1e-6;

/// Compares analytic gradients against central differences of loss.
///
/// rel_err = |analytic - numeric| / max(|analytic|, |numeric|, floor)
/// Throws numeric error naming the coordinate if the loss becomes non-finite.
GradientCheckResult finite_difference_check(
    const std::function<double(const std::vector<Matrix>&)>& loss,
    std::vector<Matrix> params,
    const std::vector<Matrix>& analytic,
    double epsilon);

}  // namespace jumplab
