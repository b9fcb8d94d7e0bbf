#pragma once

#include <cstdint>
#include <vector>

#include "jumplab/codebook.hpp"
#include "jumplab/model.hpp"
#include "jumplab/numeric.hpp"
#include "jumplab/rng.hpp"

namespace jumplab::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, RngStream& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.uniform(-1.0, 1.0);
    return m;
}

// Central differences on the full combined loss of a small dual-head net. A
// step of 1e-5 sits near the roundoff/truncation balance point for doubles.
inline GradientCheckResult combined_gradient_check(std::uint64_t seed) {
    RngStream rng(seed);
    const std::size_t classes = 4;
    const HadamardCodebook cb(8, classes);
    NetShape shape;
    shape.input_dim = 5;
    shape.trunk_widths = {7, 6};
    shape.classes = classes;
    shape.code_bits = cb.bits();
    shape.detection_hidden = 6;
    DualHeadNet net = DualHeadNet::initialize(shape, 1.0 + rng.uniform(), rng);

    const Eigen::Index n = 6;
    const Matrix x = random_matrix(n, 5, rng, 2.0);
    std::vector<std::size_t> labels;
    std::vector<double> weights;
    for (Eigen::Index i = 0; i < n; ++i) {
        labels.push_back(rng.uniform_int(classes));
        weights.push_back(i == 2 ? 0.0 : 1.0);
    }
    const Matrix targets = cb.targets_for(labels);
    const double lambda = 0.5 + rng.uniform();

    const auto cache = net.forward_cached(x);
    const auto analytic = combined_loss(net, cache, labels, targets, weights, lambda).grads;
    const auto loss = [&](const std::vector<Matrix>& p) {
        DualHeadNet probe = net;
        probe.set_parameters(p);
        const auto out = probe.forward(x);
        return classification_loss(out.probs, labels, probe.temperature(), weights).loss +
               lambda * detection_loss(out.embeddings, targets, weights).loss;
    };
    return finite_difference_check(loss, net.parameter_values(), analytic, 1e-5);
}

}  // namespace jumplab::testing
