#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "jumplab/numeric.hpp"
#include "jumplab/rng.hpp"

namespace jumplab {

enum class NoiseKind { symmetric, asymmetric, pairflip, instance };
enum class Split { train, test };

NoiseKind parse_noise_kind(std::string_view name);
std::string_view to_string(NoiseKind kind) noexcept;
std::string_view to_string(Split split) noexcept;

struct NoiseSpec {
    NoiseKind kind = NoiseKind::symmetric;
    double epsilon = 0.0;
    /// Asymmetric only: true class -> noisy class. Classes absent from the map keep their label.
    std::map<std::size_t, std::size_t> class_map;
    /// Instance only: d x C projection used to score each sample's flip propensity.
    std::optional<Matrix> idn_weights;

    void validate(std::size_t classes, std::size_t dim) const;
};

struct NoisyDataset {
    Matrix features;
    std::vector<std::size_t> true_labels;
    std::vector<std::size_t> noisy_labels;
    std::vector<bool> clean_mask;
    std::size_t classes = 0;
    NoiseSpec noise;
    Split split = Split::train;

    std::size_t size() const noexcept { return true_labels.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(features.cols()); }
    void refresh_clean_mask();
    double noise_rate() const;

    friend bool operator==(const NoisyDataset& a, const NoisyDataset& b);
};

struct DatasetSplits {
    NoisyDataset train;
    NoisyDataset test;
};

/// Gaussian blobs around +-1 centers taken from Sylvester-Hadamard rows
/// (truncated to d coordinates), isotropic standard deviation `spread`.
/// Each class is split 80/20 into train/test; both splits are shuffled.
DatasetSplits gen_blobs(std::size_t classes, std::size_t dim, std::size_t per_class, double spread,
                        std::uint64_t seed);

Matrix blob_centers(std::size_t classes, std::size_t dim);

/// Returns a copy of a clean train split with noisy labels drawn per spec.
///
///   symmetric   flip w.p. eps to a uniformly chosen different class
///   asymmetric  flip w.p. eps to class_map[y]
///   pairflip    flip w.p. eps to (y + 1) mod C
///   instance    flip w.p. p_i = clip(a + b * s_i, 0, 1), where s_i is the
///               standardised projection x_i . W[:, y_i], b = min(eps, 1 - eps),
///               and a is solved by bisection so mean(p_i) = eps; the new
///               label is the highest-scoring other class under x_i . W.
NoisyDataset inject_noise(const NoisyDataset& ds, const NoiseSpec& spec, std::uint64_t seed);

/// Flip probabilities produced by the instance-dependent recipe above.
std::vector<double> instance_flip_probabilities(const NoisyDataset& ds, const Matrix& weights,
                                                double epsilon);

Matrix random_idn_weights(std::size_t dim, std::size_t classes, std::uint64_t seed);

/// CSV with header f0,...,f{d-1},label_true,label_noisy; LF line endings.
void save_csv(const NoisyDataset& ds, const std::filesystem::path& path);
NoisyDataset load_csv(const std::filesystem::path& path, std::size_t classes, Split split = Split::train);

}  // namespace jumplab
