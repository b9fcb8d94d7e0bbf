#include "jumplab/codebook.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

namespace jumplab {

bool is_power_of_two(std::size_t k) noexcept {
    return k != 0 && (k & (k - 1)) == 0;
}

std::size_t default_code_bits(std::size_t classes) noexcept {
    std::size_t k = 16;
    while (k < 2 * classes) k *= 2;
    return k;
}

SignMatrix build_sylvester(std::size_t k) {
    if (!is_power_of_two(k)) {
        fail(ErrorKind::config, fmt::format("Sylvester order {} is not a power of two", k));
    }
    SignMatrix h(1, 1);
    h(0, 0) = 1;
    while (static_cast<std::size_t>(h.rows()) < k) {
        const Eigen::Index n = h.rows();
        SignMatrix next(2 * n, 2 * n);
        next.topLeftCorner(n, n) = h;
        next.topRightCorner(n, n) = h;
        next.bottomLeftCorner(n, n) = h;
        next.bottomRightCorner(n, n) = -h;
        h = std::move(next);
    }
    return h;
}

int hamming_distance(const Eigen::Ref<const Eigen::RowVectorXi>& a,
                     const Eigen::Ref<const Eigen::RowVectorXi>& b) {
    if (a.size() != b.size()) {
        fail(ErrorKind::shape, fmt::format("hamming_distance: lengths {} and {}", a.size(), b.size()));
    }
    return static_cast<int>((a.array() != b.array()).count());
}

HadamardCodebook::HadamardCodebook(std::size_t bits, std::size_t classes) {
    if (!is_power_of_two(bits) || bits < 2) {
        fail(ErrorKind::config, fmt::format("codebook bits K={} must be a power of two >= 2", bits));
    }
    if (classes > bits) {
        fail(ErrorKind::capacity,
             fmt::format("codebook with K={} bits holds at most {} classes, C={} requested", bits,
                         bits, classes));
    }
    const auto n = static_cast<Eigen::Index>(classes);
    codewords_ = build_sylvester(bits).topRows(n);
    targets_ = ((codewords_.cast<double>().array() + 1.0) / 2.0).matrix();

    const int expected = static_cast<int>(bits / 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const int d = hamming_distance(codewords_.row(i), codewords_.row(j));
            if (d != expected) {
                fail(ErrorKind::numeric,
                     fmt::format("codewords {} and {} at Hamming distance {}, expected {}", i, j, d,
                                 expected));
            }
        }
    }
}

HadamardCodebook::Encoded HadamardCodebook::encode(std::size_t label) const {
    if (label >= classes()) {
        fail(ErrorKind::label, fmt::format("label {} outside [0, {})", label, classes()));
    }
    const auto i = static_cast<Eigen::Index>(label);
    return {codewords_.row(i), targets_.row(i)};
}

Matrix HadamardCodebook::targets_for(const std::vector<std::size_t>& labels) const {
    Matrix out(static_cast<Eigen::Index>(labels.size()), targets_.cols());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= classes()) {
            fail(ErrorKind::label, fmt::format("label {} outside [0, {})", labels[i], classes()));
        }
        out.row(static_cast<Eigen::Index>(i)) = targets_.row(static_cast<Eigen::Index>(labels[i]));
    }
    return out;
}

void HadamardCodebook::save_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, fmt::format("cannot open '{}' for writing", path.string()));
    for (Eigen::Index i = 0; i < codewords_.rows(); ++i) {
        for (Eigen::Index j = 0; j < codewords_.cols(); ++j) {
            if (j) out << ',';
            out << codewords_(i, j);
        }
        out << '\n';
    }
    if (!out) fail(ErrorKind::io, fmt::format("write to '{}' failed", path.string()));
}

}  // namespace jumplab
