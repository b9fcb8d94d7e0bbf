#pragma once

#include <cstddef>
#include <filesystem>

#include <Eigen/Core>

#include "jumplab/numeric.hpp"

namespace jumplab {

using SignMatrix = MatrixX<int>;

/// Sylvester construction: H(1) = [1], H(2k) = [[H, H], [H, -H]].
SignMatrix build_sylvester(std::size_t k);

bool is_power_of_two(std::size_t k) noexcept;

/// Smallest power of two >= max(16, 2 * classes).
std::size_t default_code_bits(std::size_t classes) noexcept;

int hamming_distance(const Eigen::Ref<const Eigen::RowVectorXi>& a,
                     const Eigen::Ref<const Eigen::RowVectorXi>& b);

/// Class-to-codeword mapping taken from the first C rows of a K x K
/// Sylvester-Hadamard matrix. Every pair of codewords differs in exactly K/2
/// positions. Training targets are the codewords remapped from {-1,1} to {0,1}.
class HadamardCodebook {
public:
    HadamardCodebook(std::size_t bits, std::size_t classes);

    std::size_t bits() const noexcept { return static_cast<std::size_t>(codewords_.cols()); }
    std::size_t classes() const noexcept { return static_cast<std::size_t>(codewords_.rows()); }

    const SignMatrix& codewords() const noexcept { return codewords_; }
    const Matrix& targets() const noexcept { return targets_; }

    struct Encoded {
        Eigen::RowVectorXi codeword;
        Eigen::RowVectorXd target;
    };
    Encoded encode(std::size_t label) const;

    /// Gathers target rows for a batch of labels.
    Matrix targets_for(const std::vector<std::size_t>& labels) const;

    void save_csv(const std::filesystem::path& path) const;

private:
    SignMatrix codewords_;
    Matrix targets_;
};

inline HadamardCodebook derive_codebook(std::size_t bits, std::size_t classes) {
    return HadamardCodebook(bits, classes);
}

inline HadamardCodebook::Encoded encode_label(const HadamardCodebook& cb, std::size_t label) {
    return cb.encode(label);
}

}  // namespace jumplab
