#include "jumplab/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace jumplab {

void SelectionConfig::validate() const {
    if (!(tau > 0.0)) fail(ErrorKind::config, "selection: tau must be > 0");
    if (!(small_loss_keep_ratio > 0.0 && small_loss_keep_ratio <= 1.0)) {
        fail(ErrorKind::config, "selection: small_loss_keep_ratio must be in (0, 1]");
    }
    if (!(tau_decay > 0.0 && tau_decay <= 1.0)) fail(ErrorKind::config, "selection: tau_decay must be in (0, 1]");
}

double SelectionConfig::tau_after(std::size_t epochs_past_warmup) const {
    return tau * std::pow(tau_decay, static_cast<double>(epochs_past_warmup));
}

void batch_loss_variance(const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Matrix>& targets,
                         Vector& bce, Vector& variance) {
    if (z.rows() != targets.rows() || z.cols() != targets.cols()) {
        fail(ErrorKind::shape, "batch_loss_variance: embeddings and targets differ in shape");
    }
    bce.resize(z.rows());
    variance.resize(z.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const Vector d = decompose_loss(z.row(i), targets.row(i));
        bce(i) = d.mean();
        variance(i) = intra_loss_variance(d);
    }
}

bool classifier_identifier(const Eigen::Ref<const Vector>& probs, std::size_t noisy_label) {
    if (noisy_label >= static_cast<std::size_t>(probs.size())) {
        fail(ErrorKind::label, fmt::format("label {} outside [0, {})", noisy_label, probs.size()));
    }
    return static_cast<std::size_t>(argmax(probs)) == noisy_label;
}

std::vector<SelectionDecision> select_single_loss(const Eigen::Ref<const Matrix>& probs,
                                                  const Eigen::Ref<const Matrix>& z,
                                                  const Eigen::Ref<const Matrix>& targets,
                                                  std::span<const std::size_t> noisy_labels,
                                                  std::span<const std::size_t> sample_indices,
                                                  const SelectionConfig& cfg) {
    const auto n = static_cast<std::size_t>(probs.rows());
    if (noisy_labels.size() != n || sample_indices.size() != n || static_cast<std::size_t>(z.rows()) != n) {
        fail(ErrorKind::shape, "select_single_loss: batch components differ in length");
    }
    Vector bce;
    Vector variance;
    batch_loss_variance(z, targets, bce, variance);
    std::vector<SelectionDecision> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        auto& d = out[i];
        d.sample_index = sample_indices[i];
        d.variance = variance(r);
        d.bce_loss = bce(r);
        d.detection_flag = detection_identifier(d.variance, cfg);
        d.classifier_flag = classifier_identifier(probs.row(r).transpose(), noisy_labels[i]);
        d.combined_flag = combine_identifiers(d.detection_flag, d.classifier_flag);
    }
    return out;
}

std::size_t small_loss_keep_count(std::size_t n, double keep_ratio) {
    // Guard against ratio * n landing a hair above an integer through rounding.
    const double exact = keep_ratio * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(exact - 1e-9));
    return std::min(k, n);
}

std::vector<bool> small_loss_select(std::span<const double> losses, double keep_ratio) {
    if (losses.empty()) fail(ErrorKind::shape, "small_loss_select: empty batch");
    if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) {
        fail(ErrorKind::config, "small_loss_select: keep ratio must be in (0, 1]");
    }
    const std::size_t keep = small_loss_keep_count(losses.size(), keep_ratio);
    std::vector<std::size_t> order(losses.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
    std::vector<bool> mask(losses.size(), false);
    for (std::size_t i = 0; i < keep; ++i) mask[order[i]] = true;
    return mask;
}

}  // namespace jumplab
