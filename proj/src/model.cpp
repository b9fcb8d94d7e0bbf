#include "jumplab/model.hpp"
#include "jumplab/selection.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <fmt/format.h>

namespace jumplab {
namespace {

Dense random_dense(std::size_t in, std::size_t out, double stddev, RngStream& rng) {
    Dense d{Matrix(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out)),
            Matrix::Zero(1, static_cast<Eigen::Index>(out))};
    for (Eigen::Index i = 0; i < d.weights.size(); ++i) d.weights.data()[i] = stddev * rng.normal();
    return d;
}

Dense zero_dense(std::size_t in, std::size_t out) {
    return {Matrix::Zero(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out)),
            Matrix::Zero(1, static_cast<Eigen::Index>(out))};
}

Matrix affine(const Eigen::Ref<const Matrix>& x, const Dense& layer) {
    Matrix out = matmul(x, layer.weights);
    out.rowwise() += layer.bias.row(0);
    return out;
}

std::size_t detection_width(const NetShape& shape) {
    const std::size_t trunk_out = shape.trunk_widths.empty() ? shape.input_dim : shape.trunk_widths.back();
    return shape.detection_hidden ? shape.detection_hidden : trunk_out;
}

void check_shape(const NetShape& shape) {
    if (shape.input_dim == 0 || shape.classes < 2 || shape.code_bits == 0) {
        fail(ErrorKind::config, "net shape needs input_dim > 0, classes >= 2, code_bits > 0");
    }
    for (const auto w : shape.trunk_widths) {
        if (w == 0) fail(ErrorKind::config, "trunk widths must be positive");
    }
}

double weight_for(std::span<const double> weights, std::size_t i, double total) {
    return (weights.empty() ? 1.0 : weights[i]) / total;
}

double weight_total(std::span<const double> weights, std::size_t n) {
    if (weights.empty()) return static_cast<double>(n);
    if (weights.size() != n) {
        fail(ErrorKind::shape, fmt::format("{} sample weights for {} samples", weights.size(), n));
    }
    double total = 0.0;
    for (const double w : weights) total += w;
    return total;
}

}  // namespace

DualHeadNet::DualHeadNet(std::vector<Dense> trunk, Dense classifier, std::vector<Dense> detection,
                         double temperature)
    : trunk_(std::move(trunk)), classifier_(std::move(classifier)), detection_(std::move(detection)) {
    if (detection_.size() != 3) fail(ErrorKind::shape, "detection head must have three layers");
    Eigen::Index width = trunk_.empty() ? classifier_.inputs() : trunk_.front().inputs();
    for (const auto& layer : trunk_) {
        if (layer.inputs() != width) fail(ErrorKind::shape, "trunk layer widths do not chain");
        width = layer.outputs();
    }
    if (classifier_.inputs() != width || detection_.front().inputs() != width) {
        fail(ErrorKind::shape, "trunk output width must equal both heads' input width");
    }
    for (std::size_t i = 1; i < detection_.size(); ++i) {
        if (detection_[i].inputs() != detection_[i - 1].outputs()) {
            fail(ErrorKind::shape, "detection layer widths do not chain");
        }
    }
    set_temperature(temperature);
}

DualHeadNet DualHeadNet::initialize(const NetShape& shape, double temperature, RngStream& rng) {
    check_shape(shape);
    std::vector<Dense> trunk;
    std::size_t width = shape.input_dim;
    for (const auto w : shape.trunk_widths) {
        trunk.push_back(random_dense(width, w, std::sqrt(2.0 / static_cast<double>(width)), rng));
        width = w;
    }
    const auto glorot = [](std::size_t in, std::size_t out) {
        return std::sqrt(2.0 / static_cast<double>(in + out));
    };
    Dense classifier = random_dense(width, shape.classes, glorot(width, shape.classes), rng);
    const std::size_t hidden = detection_width(shape);
    std::vector<Dense> detection;
    detection.push_back(random_dense(width, hidden, glorot(width, hidden), rng));
    detection.push_back(random_dense(hidden, hidden, glorot(hidden, hidden), rng));
    detection.push_back(random_dense(hidden, shape.code_bits, glorot(hidden, shape.code_bits), rng));
    return DualHeadNet(std::move(trunk), std::move(classifier), std::move(detection), temperature);
}

DualHeadNet DualHeadNet::zeros(const NetShape& shape, double temperature) {
    check_shape(shape);
    std::vector<Dense> trunk;
    std::size_t width = shape.input_dim;
    for (const auto w : shape.trunk_widths) {
        trunk.push_back(zero_dense(width, w));
        width = w;
    }
    const std::size_t hidden = detection_width(shape);
    std::vector<Dense> detection{zero_dense(width, hidden), zero_dense(hidden, hidden),
                                 zero_dense(hidden, shape.code_bits)};
    return DualHeadNet(std::move(trunk), zero_dense(width, shape.classes), std::move(detection),
                       temperature);
}

void DualHeadNet::set_temperature(double t) {
    if (!(t > 0.0) || !std::isfinite(t)) fail(ErrorKind::config, "temperature must be positive");
    temperature_ = t;
}

std::size_t DualHeadNet::input_dim() const noexcept {
    return static_cast<std::size_t>(trunk_.empty() ? classifier_.inputs() : trunk_.front().inputs());
}
std::size_t DualHeadNet::classes() const noexcept {
    return static_cast<std::size_t>(classifier_.outputs());
}
std::size_t DualHeadNet::code_bits() const noexcept {
    return static_cast<std::size_t>(detection_.back().outputs());
}

ForwardCache DualHeadNet::forward_cached(const Eigen::Ref<const Matrix>& batch) const {
    if (static_cast<std::size_t>(batch.cols()) != input_dim()) {
        fail(ErrorKind::shape, fmt::format("forward: batch has {} features, net expects {}",
                                           batch.cols(), input_dim()));
    }
    ForwardCache c;
    Matrix h = batch;
    for (const auto& layer : trunk_) {
        c.trunk_inputs.push_back(h);
        c.trunk_pre.push_back(affine(h, layer));
        h = c.trunk_pre.back().cwiseMax(0.0);
    }
    c.features = std::move(h);
    c.logits = affine(c.features, classifier_);

    Matrix g = c.features;
    for (const auto& layer : detection_) {
        g = affine(g, layer);
        for_each_row(g, [](auto& row) { row = row.array().tanh().matrix(); });
        c.detection_act.push_back(g);
    }

    c.out.probs = softmax_rows(c.logits, temperature_);
    c.out.preds.resize(static_cast<std::size_t>(batch.rows()));
    for (Eigen::Index r = 0; r < batch.rows(); ++r) {
        c.out.preds[static_cast<std::size_t>(r)] = static_cast<std::size_t>(argmax(c.out.probs.row(r)));
    }
    c.out.embeddings =
        ((c.detection_act.back().array() + 1.0) * 0.5).cwiseMax(kLogClamp).cwiseMin(1.0 - kLogClamp).matrix();
    return c;
}

ForwardOutput DualHeadNet::forward(const Eigen::Ref<const Matrix>& batch) const {
    return forward_cached(batch).out;
}

Gradients DualHeadNet::backward(const ForwardCache& cache, const Eigen::Ref<const Matrix>& grad_logits,
                                const Eigen::Ref<const Matrix>& grad_detection_pre) const {
    const std::size_t depth = trunk_.size();
    Gradients grads(2 * depth + 2 + 2 * detection_.size());

    // Classification head.
    const std::size_t cls = 2 * depth;
    grads[cls] = cache.features.transpose() * grad_logits;
    grads[cls + 1] = grad_logits.colwise().sum();
    Matrix grad_features = grad_logits * classifier_.weights.transpose();

    // Detection head, last layer first.
    const std::size_t det = cls + 2;
    Matrix grad_pre = grad_detection_pre;
    for (std::size_t k = detection_.size(); k-- > 0;) {
        const Matrix& input = k == 0 ? cache.features : cache.detection_act[k - 1];
        grads[det + 2 * k] = input.transpose() * grad_pre;
        grads[det + 2 * k + 1] = grad_pre.colwise().sum();
        Matrix grad_input = grad_pre * detection_[k].weights.transpose();
        if (k == 0) {
            grad_features += grad_input;
        } else {
            const auto& act = cache.detection_act[k - 1];
            grad_pre = (grad_input.array() * (1.0 - act.array().square())).matrix();
        }
    }

    // Trunk.
    Matrix grad_h = std::move(grad_features);
    for (std::size_t l = depth; l-- > 0;) {
        const Matrix grad_a = (grad_h.array() * (cache.trunk_pre[l].array() > 0.0).cast<double>()).matrix();
        grads[2 * l] = cache.trunk_inputs[l].transpose() * grad_a;
        grads[2 * l + 1] = grad_a.colwise().sum();
        if (l > 0) grad_h = grad_a * trunk_[l].weights.transpose();
    }
    return grads;
}

std::vector<Matrix*> DualHeadNet::parameters() {
    std::vector<Matrix*> out;
    for (auto& layer : trunk_) {
        out.push_back(&layer.weights);
        out.push_back(&layer.bias);
    }
    out.push_back(&classifier_.weights);
    out.push_back(&classifier_.bias);
    for (auto& layer : detection_) {
        out.push_back(&layer.weights);
        out.push_back(&layer.bias);
    }
    return out;
}

std::vector<const Matrix*> DualHeadNet::parameters() const {
    auto mut = const_cast<DualHeadNet*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

std::vector<Matrix> DualHeadNet::parameter_values() const {
    std::vector<Matrix> out;
    for (const Matrix* p : parameters()) out.push_back(*p);
    return out;
}

void DualHeadNet::set_parameters(const std::vector<Matrix>& values) {
    auto params = parameters();
    if (values.size() != params.size()) {
        fail(ErrorKind::shape, fmt::format("set_parameters: {} tensors for {} parameters",
                                           values.size(), params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (values[i].rows() != params[i]->rows() || values[i].cols() != params[i]->cols()) {
            fail(ErrorKind::shape, fmt::format("set_parameters: tensor {} is {}, expected {}", i,
                                               shape_string(values[i].rows(), values[i].cols()),
                                               shape_string(params[i]->rows(), params[i]->cols())));
        }
        *params[i] = values[i];
    }
}

std::size_t DualHeadNet::parameter_count() const {
    std::size_t n = 0;
    for (const Matrix* p : parameters()) n += static_cast<std::size_t>(p->size());
    return n;
}

bool DualHeadNet::parameters_finite() const {
    return std::ranges::all_of(parameters(), [](const Matrix* p) { return p->allFinite(); });
}

Vector per_sample_cross_entropy(const Eigen::Ref<const Matrix>& probs,
                                std::span<const std::size_t> labels) {
    if (static_cast<std::size_t>(probs.rows()) != labels.size()) {
        fail(ErrorKind::shape, fmt::format("cross entropy: {} rows for {} labels", probs.rows(),
                                           labels.size()));
    }
    Vector out(probs.rows());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        const std::size_t y = labels[static_cast<std::size_t>(i)];
        if (y >= static_cast<std::size_t>(probs.cols())) {
            fail(ErrorKind::label, fmt::format("label {} outside [0, {})", y, probs.cols()));
        }
        out(i) = -std::log(std::max(probs(i, static_cast<Eigen::Index>(y)), kLogClamp));
    }
    return out;
}

LossAndGrad classification_loss(const Eigen::Ref<const Matrix>& probs,
                                std::span<const std::size_t> labels, double temperature,
                                std::span<const double> weights) {
    if (!(temperature > 0.0)) fail(ErrorKind::config, "temperature must be positive");
    const Vector per_sample = per_sample_cross_entropy(probs, labels);
    const double total = weight_total(weights, labels.size());
    LossAndGrad out{0.0, probs / temperature};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out.grad(r, static_cast<Eigen::Index>(labels[i])) -= 1.0 / temperature;
        const double w = total > 0.0 ? weight_for(weights, i, total) : 0.0;
        out.loss += w * per_sample(r);
        out.grad.row(r) *= w;
    }
    return out;
}

Vector per_sample_bce(const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Matrix>& targets) {
    if (z.rows() != targets.rows() || z.cols() != targets.cols()) {
        fail(ErrorKind::shape, fmt::format("bce: embeddings {} vs targets {}",
                                           shape_string(z.rows(), z.cols()),
                                           shape_string(targets.rows(), targets.cols())));
    }
    if (!((targets.array() == 0.0) || (targets.array() == 1.0)).all()) {
        fail(ErrorKind::encoding, "bce: targets must be 0 or 1");
    }
    Vector out(z.rows());
    for (Eigen::Index r = 0; r < z.rows(); ++r) out(r) = decompose_loss(z.row(r), targets.row(r)).mean();
    return out;
}

LossAndGrad detection_loss(const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Matrix>& targets,
                           std::span<const double> weights) {
    const Vector per_sample = per_sample_bce(z, targets);
    const auto n = static_cast<std::size_t>(z.rows());
    const double total = weight_total(weights, n);
    const double bits = static_cast<double>(z.cols());
    // With z = (tanh(u) + 1) / 2, dBCE/du = 2 (z - t) per bit before averaging.
    LossAndGrad out{0.0, (2.0 / bits) * (z - targets)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const double w = total > 0.0 ? weight_for(weights, i, total) : 0.0;
        out.loss += w * per_sample(r);
        out.grad.row(r) *= w;
    }
    return out;
}

CombinedLoss combined_loss(const DualHeadNet& net, const ForwardCache& cache,
                           std::span<const std::size_t> labels, const Eigen::Ref<const Matrix>& targets,
                           std::span<const double> weights, double detection_weight) {
    auto ce = classification_loss(cache.out.probs, labels, net.temperature(), weights);
    auto bce = detection_loss(cache.out.embeddings, targets, weights);
    bce.grad *= detection_weight;
    CombinedLoss out;
    out.ce = ce.loss;
    out.bce = bce.loss;
    out.total = ce.loss + detection_weight * bce.loss;
    out.grads = net.backward(cache, ce.grad, bce.grad);
    return out;
}

void SgdMomentum::step(DualHeadNet& net, const Gradients& grads, double lr, double momentum,
                       double weight_decay) {
    auto params = net.parameters();
    if (grads.size() != params.size()) {
        fail(ErrorKind::shape, fmt::format("sgd: {} gradients for {} parameters", grads.size(),
                                           params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].rows() != params[i]->rows() || grads[i].cols() != params[i]->cols()) {
            fail(ErrorKind::shape, fmt::format("sgd: gradient {} is {}, parameter is {}", i,
                                               shape_string(grads[i].rows(), grads[i].cols()),
                                               shape_string(params[i]->rows(), params[i]->cols())));
        }
        if (!grads[i].allFinite()) {
            fail(ErrorKind::numeric, fmt::format("sgd: non-finite gradient in tensor {}; step refused", i));
        }
    }
    if (velocity_.size() != params.size()) {
        velocity_.clear();
        for (const Matrix* p : params) velocity_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity_[i] = momentum * velocity_[i] + grads[i] + weight_decay * *params[i];
        *params[i] -= lr * velocity_[i];
    }
}

double cosine_lr(std::size_t epoch, std::size_t total_epochs, double lr0, double lr_min) {
    if (total_epochs == 0) return lr0;
    const double progress = static_cast<double>(epoch) / static_cast<double>(total_epochs);
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

void TrainConfig::validate() const {
    if (!(lr_min > 0.0 && lr_min <= lr0)) fail(ErrorKind::config, "train: need 0 < lr_min <= lr0");
    if (!(momentum >= 0.0 && momentum < 1.0)) fail(ErrorKind::config, "train: need 0 <= momentum < 1");
    if (!(weight_decay >= 0.0)) fail(ErrorKind::config, "train: weight_decay must be >= 0");
    if (batch_size == 0) fail(ErrorKind::config, "train: batch_size must be positive");
    if (epochs == 0) fail(ErrorKind::config, "train: epochs must be positive");
    if (warmup_epochs >= epochs) fail(ErrorKind::config, "train: warmup_epochs must be < epochs");
    if (!(temperature > 0.0)) fail(ErrorKind::config, "train: temperature must be positive");
    if (!(detection_weight >= 0.0)) fail(ErrorKind::config, "train: detection_weight must be >= 0");
    if (trunk_widths.empty()) fail(ErrorKind::config, "train: trunk needs at least one layer");
}

namespace {

constexpr std::array<char, 8> kMagic{'J', 'L', 'C', 'K', 'P', 'T', '0', '1'};

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little endian");
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::filesystem::path& path) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) fail(ErrorKind::parse, fmt::format("checkpoint '{}' truncated", path.string()));
    return value;
}

}  // namespace

void save_checkpoint(const DualHeadNet& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, fmt::format("cannot open '{}' for writing", path.string()));
    const auto params = net.parameters();
    out.write(kMagic.data(), kMagic.size());
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const Matrix* p : params) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->rows()));
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->cols()));
    }
    for (const Matrix* p : params) {
        for (Eigen::Index i = 0; i < p->size(); ++i) write_le<double>(out, p->data()[i]);
    }
    if (!out) fail(ErrorKind::io, fmt::format("write to '{}' failed", path.string()));
}

DualHeadNet load_checkpoint(const std::filesystem::path& path, double temperature) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, fmt::format("cannot open '{}'", path.string()));
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) fail(ErrorKind::parse, fmt::format("'{}' is not a checkpoint", path.string()));
    const auto count = read_le<std::uint32_t>(in, path);
    if (count < 8 || count % 2 != 0) {
        fail(ErrorKind::parse, fmt::format("checkpoint '{}' has {} tensors", path.string(), count));
    }
    std::vector<Matrix> tensors;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto rows = read_le<std::uint32_t>(in, path);
        const auto cols = read_le<std::uint32_t>(in, path);
        tensors.emplace_back(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    }
    for (auto& t : tensors) {
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = read_le<double>(in, path);
    }
    const std::size_t depth = (count - 8) / 2;
    std::vector<Dense> trunk;
    for (std::size_t l = 0; l < depth; ++l) trunk.push_back({tensors[2 * l], tensors[2 * l + 1]});
    Dense classifier{tensors[2 * depth], tensors[2 * depth + 1]};
    std::vector<Dense> detection;
    for (std::size_t k = 0; k < 3; ++k) {
        detection.push_back({tensors[2 * depth + 2 + 2 * k], tensors[2 * depth + 3 + 2 * k]});
    }
    return DualHeadNet(std::move(trunk), std::move(classifier), std::move(detection), temperature);
}

}  // namespace jumplab
