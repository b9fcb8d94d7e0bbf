#include "jumplab/metrics.hpp"

#include <algorithm>
#include <set>

#include <sys/resource.h>

#include <fmt/format.h>

namespace jumplab {

double iou(const std::vector<bool>& a, const std::vector<bool>& b) {
    if (a.size() != b.size()) {
        fail(ErrorKind::shape, fmt::format("iou: masks of length {} and {}", a.size(), b.size()));
    }
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        inter += (a[i] && b[i]) ? 1 : 0;
        uni += (a[i] || b[i]) ? 1 : 0;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double iou(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    const std::set<std::size_t> sa(a.begin(), a.end());
    const std::set<std::size_t> sb(b.begin(), b.end());
    std::size_t inter = 0;
    for (const auto x : sa) inter += sb.count(x);
    const std::size_t uni = sa.size() + sb.size() - inter;
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

SelectionQuality selection_quality(const std::vector<bool>& selected, const std::vector<bool>& clean) {
    if (selected.size() != clean.size()) {
        fail(ErrorKind::shape, fmt::format("selection_quality: masks of length {} and {}",
                                           selected.size(), clean.size()));
    }
    std::size_t tp = 0;
    std::size_t n_selected = 0;
    std::size_t n_clean = 0;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        tp += (selected[i] && clean[i]) ? 1 : 0;
        n_selected += selected[i] ? 1 : 0;
        n_clean += clean[i] ? 1 : 0;
    }
    SelectionQuality q;
    if (n_selected > 0) q.precision = static_cast<double>(tp) / static_cast<double>(n_selected);
    else q.degenerate = true;
    if (n_clean > 0) q.recall = static_cast<double>(tp) / static_cast<double>(n_clean);
    else q.degenerate = true;
    if (q.precision + q.recall > 0.0) {
        q.f1 = 2.0 * q.precision * q.recall / (q.precision + q.recall);
    } else {
        q.degenerate = true;
    }
    return q;
}

double evaluate(const DualHeadNet& net, const NoisyDataset& testset, std::size_t batch_size) {
    if (testset.size() == 0) return 0.0;
    std::size_t correct = 0;
    const auto n = static_cast<Eigen::Index>(testset.size());
    const auto step = static_cast<Eigen::Index>(std::max<std::size_t>(batch_size, 1));
    for (Eigen::Index start = 0; start < n; start += step) {
        const Eigen::Index len = std::min(step, n - start);
        const auto out = net.forward(testset.features.middleRows(start, len));
        for (Eigen::Index i = 0; i < len; ++i) {
            correct += out.preds[static_cast<std::size_t>(i)] ==
                               testset.true_labels[static_cast<std::size_t>(start + i)]
                           ? 1
                           : 0;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(testset.size());
}

std::uint64_t peak_resident_bytes() {
    rusage usage{};
    if (getrusage(RUSAGE_SELF, &usage) != 0) return 0;
    // Linux reports kilobytes.
    return static_cast<std::uint64_t>(usage.ru_maxrss) * 1024u;
}

}  // namespace jumplab
