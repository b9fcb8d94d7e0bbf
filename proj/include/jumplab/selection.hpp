#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "jumplab/numeric.hpp"

namespace jumplab {

struct SelectionConfig {
    double tau = 0.001;
    double small_loss_keep_ratio = 0.5;
    /// Per-epoch factor applied to tau after warm-up; 1 keeps tau constant.
    double tau_decay = 1.0;

    void validate() const;
    double tau_after(std::size_t epochs_past_warmup) const;
};

struct SelectionDecision {
    std::size_t sample_index = 0;
    bool detection_flag = false;
    bool classifier_flag = false;
    bool combined_flag = false;
    double variance = 0.0;
    double bce_loss = 0.0;
};

/// Per-bit binary cross entropy between an embedding and its target codeword.
template <typename DerivedZ, typename DerivedT>
VectorX<typename DerivedZ::Scalar> decompose_loss(const Eigen::MatrixBase<DerivedZ>& z,
                                                  const Eigen::MatrixBase<DerivedT>& target) {
    using Scalar = typename DerivedZ::Scalar;
    if (z.size() != target.size()) {
        fail(ErrorKind::shape, "decompose_loss: embedding and target lengths differ");
    }
    const auto zc = z.reshaped().array().max(Scalar(1e-12)).min(Scalar(1) - Scalar(1e-12));
    const auto t = target.reshaped().array().template cast<Scalar>();
    return (-(t * zc.log() + (Scalar(1) - t) * (Scalar(1) - zc).log())).matrix();
}

/// Population variance, (1/K) * sum (d_j - mean)^2.
template <typename Derived>
typename Derived::Scalar intra_loss_variance(const Eigen::MatrixBase<Derived>& d) {
    using Scalar = typename Derived::Scalar;
    if (d.size() == 0) fail(ErrorKind::shape, "intra_loss_variance: empty loss vector");
    // Shifting by the first entry keeps constant vectors at exactly zero.
    const auto shifted = (d.array() - d.reshaped()(0)).eval();
    const Scalar mean = shifted.mean();
    return (shifted - mean).square().sum() / static_cast<Scalar>(d.size());
}

/// Row-wise decomposition + variance for a batch; fills both outputs.
void batch_loss_variance(const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Matrix>& targets,
                         Vector& bce, Vector& variance);

inline bool detection_identifier(double variance, const SelectionConfig& cfg) {
    return variance <= cfg.tau;
}

bool classifier_identifier(const Eigen::Ref<const Vector>& probs, std::size_t noisy_label);

inline bool combine_identifiers(bool detection, bool classifier) {
    return detection || classifier;
}

/// Single-loss selection for a batch from one forward pass.
std::vector<SelectionDecision> select_single_loss(const Eigen::Ref<const Matrix>& probs,
                                                  const Eigen::Ref<const Matrix>& z,
                                                  const Eigen::Ref<const Matrix>& targets,
                                                  std::span<const std::size_t> noisy_labels,
                                                  std::span<const std::size_t> sample_indices,
                                                  const SelectionConfig& cfg);

/// Marks the ceil(keep_ratio * n) smallest losses; ties go to the lower index.
std::vector<bool> small_loss_select(std::span<const double> losses, double keep_ratio);

std::size_t small_loss_keep_count(std::size_t n, double keep_ratio);

}  // namespace jumplab
