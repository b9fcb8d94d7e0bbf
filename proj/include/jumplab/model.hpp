#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "jumplab/numeric.hpp"
#include "jumplab/rng.hpp"

namespace jumplab {

/// Fully connected layer; weights are in x out, bias is 1 x out.
struct Dense {
    Matrix weights;
    Matrix bias;

    Eigen::Index inputs() const noexcept { return weights.rows(); }
    Eigen::Index outputs() const noexcept { return weights.cols(); }
};

struct NetShape {
    std::size_t input_dim = 0;
    std::vector<std::size_t> trunk_widths{128, 128};
    std::size_t classes = 0;
    std::size_t code_bits = 0;
    /// Hidden width of the two tanh layers in the detection head; 0 means
    /// "same as the trunk output width".
    std::size_t detection_hidden = 0;
};

struct ForwardOutput {
    Matrix probs;                    ///< batch x C, rows sum to 1
    std::vector<std::size_t> preds;  ///< argmax per row, lowest index on ties
    Matrix embeddings;               ///< batch x K, strictly inside (0, 1)
};

/// Intermediate values kept for the backward pass.
struct ForwardCache {
    std::vector<Matrix> trunk_inputs;  ///< input to each trunk layer
    std::vector<Matrix> trunk_pre;     ///< pre-activation of each trunk layer
    Matrix features;                   ///< trunk output
    Matrix logits;
    std::vector<Matrix> detection_act;  ///< tanh outputs of the three detection layers
    ForwardOutput out;
};

/// Parameter-shaped gradient container, same order as DualHeadNet::parameters().
using Gradients = std::vector<Matrix>;

/// Shared relu trunk feeding a temperature-scaled classification head and a
/// three-layer tanh detection head whose outputs are remapped to (0, 1).
class DualHeadNet {
public:
    DualHeadNet() = default;
    DualHeadNet(std::vector<Dense> trunk, Dense classifier, std::vector<Dense> detection,
                double temperature);

    /// He-normal init for relu layers, Glorot-normal for the rest; zero biases.
    static DualHeadNet initialize(const NetShape& shape, double temperature, RngStream& rng);

    /// All weights and biases zero.
    static DualHeadNet zeros(const NetShape& shape, double temperature);

    ForwardCache forward_cached(const Eigen::Ref<const Matrix>& batch) const;
    ForwardOutput forward(const Eigen::Ref<const Matrix>& batch) const;

    /// Backpropagates gradients given with respect to the classifier logits and
    /// the detection head's last pre-activation.
    Gradients backward(const ForwardCache& cache, const Eigen::Ref<const Matrix>& grad_logits,
                       const Eigen::Ref<const Matrix>& grad_detection_pre) const;

    std::vector<Matrix*> parameters();
    std::vector<const Matrix*> parameters() const;
    std::vector<Matrix> parameter_values() const;
    void set_parameters(const std::vector<Matrix>& values);
    std::size_t parameter_count() const;
    bool parameters_finite() const;

    double temperature() const noexcept { return temperature_; }
    void set_temperature(double t);

    std::size_t input_dim() const noexcept;
    std::size_t classes() const noexcept;
    std::size_t code_bits() const noexcept;
    std::size_t trunk_depth() const noexcept { return trunk_.size(); }

    const std::vector<Dense>& trunk() const noexcept { return trunk_; }
    const Dense& classifier() const noexcept { return classifier_; }
    const std::vector<Dense>& detection() const noexcept { return detection_; }

private:
    std::vector<Dense> trunk_;
    Dense classifier_;
    std::vector<Dense> detection_;
    double temperature_ = 1.0;
};

struct LossAndGrad {
    double loss = 0.0;
    Matrix grad;
};

/// Per-sample cross entropy -log p[label].
Vector per_sample_cross_entropy(const Eigen::Ref<const Matrix>& probs,
                                std::span<const std::size_t> labels);

/// Weighted mean cross entropy and its gradient with respect to the logits,
/// including the 1/T factor of the tempered softmax. Empty weights mean all 1.
LossAndGrad classification_loss(const Eigen::Ref<const Matrix>& probs,
                                std::span<const std::size_t> labels, double temperature,
                                std::span<const double> weights = {});

inline constexpr double kLogClamp = 1e-12;

/// Per-sample mean over bits of the binary cross entropy between z and targets.
Vector per_sample_bce(const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Matrix>& targets);

/// Weighted batch mean of per_sample_bce and its gradient with respect to the
/// tanh pre-activation feeding z = (tanh(u) + 1) / 2.
LossAndGrad detection_loss(const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Matrix>& targets,
                           std::span<const double> weights = {});

/// v <- momentum * v + grad + weight_decay * theta;  theta <- theta - lr * v
class SgdMomentum {
public:
    void step(DualHeadNet& net, const Gradients& grads, double lr, double momentum,
              double weight_decay);
    void reset() { velocity_.clear(); }
    const std::vector<Matrix>& velocity() const noexcept { return velocity_; }

private:
    std::vector<Matrix> velocity_;
};

double cosine_lr(std::size_t epoch, std::size_t total_epochs, double lr0, double lr_min);

struct TrainConfig {
    double lr0 = 0.005;
    double lr_min = 1e-4;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::size_t batch_size = 64;
    std::size_t epochs = 60;
    std::size_t warmup_epochs = 9;
    double temperature = 2.0;
    double detection_weight = 1.0;
    std::uint64_t seed = 1;
    std::vector<std::size_t> trunk_widths{128, 128};
    std::size_t code_bits = 0;  ///< 0 selects default_code_bits(C)

    void validate() const;
};

/// Combined loss CE + detection_weight * BCE, weighted by per-sample weights.
struct CombinedLoss {
    double ce = 0.0;
    double bce = 0.0;
    double total = 0.0;
    Gradients grads;
};

CombinedLoss combined_loss(const DualHeadNet& net, const ForwardCache& cache,
                           std::span<const std::size_t> labels, const Eigen::Ref<const Matrix>& targets,
                           std::span<const double> weights, double detection_weight);

/// Flat binary layout: "JLCKPT01", uint32 tensor count, (uint32 rows, uint32
/// cols) per tensor, then every tensor's row-major float64 data, little endian.
/// Tensor order: trunk (W, b)..., classifier (W, b), detection (W, b) x 3.
void save_checkpoint(const DualHeadNet& net, const std::filesystem::path& path);
DualHeadNet load_checkpoint(const std::filesystem::path& path, double temperature);

}  // namespace jumplab
