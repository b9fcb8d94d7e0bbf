#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "jumplab/data.hpp"
#include "jumplab/model.hpp"

namespace jumplab {

/// |a & b| / |a | b| over boolean membership masks of one index universe.
/// Two empty selections agree completely and score 1.0.
double iou(const std::vector<bool>& a, const std::vector<bool>& b);

/// Same, over explicit index sets.
double iou(std::span<const std::size_t> a, std::span<const std::size_t> b);

struct SelectionQuality {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    /// Set when a 0/0 ratio was defined as 0.
    bool degenerate = false;
};

SelectionQuality selection_quality(const std::vector<bool>& selected, const std::vector<bool>& clean);

/// Fraction of test samples whose classifier-head argmax equals the true label.
double evaluate(const DualHeadNet& net, const NoisyDataset& testset, std::size_t batch_size = 256);

/// Peak resident set size of this process in bytes; 0 when unavailable.
std::uint64_t peak_resident_bytes();

}  // namespace jumplab
