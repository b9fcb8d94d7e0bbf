#include "jumplab/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "jumplab/codebook.hpp"

namespace jumplab {

NoiseKind parse_noise_kind(std::string_view name) {
    if (name == "symmetric") return NoiseKind::symmetric;
    if (name == "asymmetric") return NoiseKind::asymmetric;
    if (name == "pairflip") return NoiseKind::pairflip;
    if (name == "instance") return NoiseKind::instance;
    fail(ErrorKind::config, fmt::format("unknown noise kind '{}'", name));
}

std::string_view to_string(NoiseKind kind) noexcept {
    switch (kind) {
        case NoiseKind::symmetric: return "symmetric";
        case NoiseKind::asymmetric: return "asymmetric";
        case NoiseKind::pairflip: return "pairflip";
        case NoiseKind::instance: return "instance";
    }
    return "unknown";
}

std::string_view to_string(Split split) noexcept {
    return split == Split::train ? "train" : "test";
}

void NoiseSpec::validate(std::size_t classes, std::size_t dim) const {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        fail(ErrorKind::config, fmt::format("noise epsilon {} outside [0, 1]", epsilon));
    }
    if (kind == NoiseKind::asymmetric) {
        if (class_map.empty()) fail(ErrorKind::config, "asymmetric noise requires a class_map");
        for (const auto& [from, to] : class_map) {
            if (from >= classes || to >= classes) {
                fail(ErrorKind::config, fmt::format("class_map entry {}->{} outside [0, {})", from, to, classes));
            }
        }
    }
    if (kind == NoiseKind::instance) {
        if (!idn_weights) fail(ErrorKind::config, "instance noise requires idn_weights");
        if (static_cast<std::size_t>(idn_weights->rows()) != dim ||
            static_cast<std::size_t>(idn_weights->cols()) != classes) {
            fail(ErrorKind::shape, fmt::format("idn_weights is {}, expected {}",
                                               shape_string(idn_weights->rows(), idn_weights->cols()),
                                               shape_string(static_cast<Eigen::Index>(dim),
                                                            static_cast<Eigen::Index>(classes))));
        }
    }
}

void NoisyDataset::refresh_clean_mask() {
    clean_mask.resize(size());
    for (std::size_t i = 0; i < size(); ++i) clean_mask[i] = noisy_labels[i] == true_labels[i];
}

double NoisyDataset::noise_rate() const {
    if (size() == 0) return 0.0;
    const auto clean = std::count(clean_mask.begin(), clean_mask.end(), true);
    return 1.0 - static_cast<double>(clean) / static_cast<double>(size());
}

bool operator==(const NoisyDataset& a, const NoisyDataset& b) {
    return a.classes == b.classes && a.split == b.split && a.features.rows() == b.features.rows() &&
           a.features.cols() == b.features.cols() && a.features == b.features &&
           a.true_labels == b.true_labels && a.noisy_labels == b.noisy_labels &&
           a.clean_mask == b.clean_mask;
}

Matrix blob_centers(std::size_t classes, std::size_t dim) {
    std::size_t order = 1;
    while (order < std::max(classes, dim)) order *= 2;
    const SignMatrix h = build_sylvester(order);
    return h.topLeftCorner(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(dim)).cast<double>();
}

DatasetSplits gen_blobs(std::size_t classes, std::size_t dim, std::size_t per_class, double spread,
                        std::uint64_t seed) {
    if (classes < 2 || dim < 2) fail(ErrorKind::config, "gen_blobs: need classes >= 2 and dim >= 2");
    if (!(spread >= 0.0)) fail(ErrorKind::config, "gen_blobs: spread must be >= 0");
    const Matrix centers = blob_centers(classes, dim);
    RngStream rng(seed);
    RngStream sample_rng = rng.derive("blobs/samples");
    RngStream order_rng = rng.derive("blobs/order");

    const std::size_t train_per_class = (per_class * 8) / 10;
    std::vector<std::pair<Vector, std::size_t>> train_rows;
    std::vector<std::pair<Vector, std::size_t>> test_rows;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t k = 0; k < per_class; ++k) {
            Vector x = centers.row(static_cast<Eigen::Index>(c)).transpose();
            for (Eigen::Index j = 0; j < x.size(); ++j) x(j) += spread * sample_rng.normal();
            (k < train_per_class ? train_rows : test_rows).emplace_back(std::move(x), c);
        }
    }
    const auto assemble = [&](std::vector<std::pair<Vector, std::size_t>>& rows, Split split) {
        const auto order = order_rng.permutation(rows.size());
        NoisyDataset ds;
        ds.classes = classes;
        ds.split = split;
        ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& [x, y] = rows[order[i]];
            ds.features.row(static_cast<Eigen::Index>(i)) = x.transpose();
            ds.true_labels.push_back(y);
        }
        ds.noisy_labels = ds.true_labels;
        ds.refresh_clean_mask();
        return ds;
    };
    return {assemble(train_rows, Split::train), assemble(test_rows, Split::test)};
}

Matrix random_idn_weights(std::size_t dim, std::size_t classes, std::uint64_t seed) {
    RngStream rng(seed);
    Matrix w(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(classes));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
    return w;
}

std::vector<double> instance_flip_probabilities(const NoisyDataset& ds, const Matrix& weights,
                                                double epsilon) {
    const std::size_t n = ds.size();
    std::vector<double> probs(n, epsilon);
    if (n == 0 || epsilon <= 0.0 || epsilon >= 1.0) return probs;
    const Matrix scores = ds.features * weights;
    Vector s(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        s(static_cast<Eigen::Index>(i)) =
            scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(ds.true_labels[i]));
    }
    const double mean = s.mean();
    const double sd = std::sqrt((s.array() - mean).square().mean());
    if (sd > 0.0) s = (s.array() - mean) / sd;
    else s.setZero();

    const double slope = std::min(epsilon, 1.0 - epsilon);
    const auto mean_prob = [&](double offset) {
        return (offset + slope * s.array()).max(0.0).min(1.0).mean();
    };
    double lo = -1.0 - slope * s.cwiseAbs().maxCoeff();
    double hi = 2.0 + slope * s.cwiseAbs().maxCoeff();
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        (mean_prob(mid) < epsilon ? lo : hi) = mid;
    }
    const double offset = 0.5 * (lo + hi);
    for (std::size_t i = 0; i < n; ++i) {
        probs[i] = std::clamp(offset + slope * s(static_cast<Eigen::Index>(i)), 0.0, 1.0);
    }
    return probs;
}

NoisyDataset inject_noise(const NoisyDataset& ds, const NoiseSpec& spec, std::uint64_t seed) {
    if (ds.split != Split::train) fail(ErrorKind::config, "inject_noise: only the train split takes noise");
    if (ds.noisy_labels != ds.true_labels) fail(ErrorKind::config, "inject_noise: input split is not clean");
    spec.validate(ds.classes, ds.dim());
    RngStream rng = RngStream(seed).derive("noise");
    NoisyDataset out = ds;
    out.noise = spec;
    const std::size_t c = ds.classes;

    std::vector<double> flip_prob;
    Matrix scores;
    if (spec.kind == NoiseKind::instance) {
        flip_prob = instance_flip_probabilities(ds, *spec.idn_weights, spec.epsilon);
        scores = ds.features * *spec.idn_weights;
    }
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::size_t y = ds.true_labels[i];
        const double p = spec.kind == NoiseKind::instance ? flip_prob[i] : spec.epsilon;
        if (!rng.bernoulli(p)) continue;
        switch (spec.kind) {
            case NoiseKind::symmetric: {
                const auto k = static_cast<std::size_t>(rng.uniform_int(c - 1));
                out.noisy_labels[i] = k < y ? k : k + 1;
                break;
            }
            case NoiseKind::asymmetric: {
                const auto it = spec.class_map.find(y);
                if (it != spec.class_map.end()) out.noisy_labels[i] = it->second;
                break;
            }
            case NoiseKind::pairflip:
                out.noisy_labels[i] = (y + 1) % c;
                break;
            case NoiseKind::instance: {
                std::size_t best = y == 0 ? 1 : 0;
                const auto r = static_cast<Eigen::Index>(i);
                for (std::size_t k = 0; k < c; ++k) {
                    if (k != y && scores(r, static_cast<Eigen::Index>(k)) >
                                      scores(r, static_cast<Eigen::Index>(best))) {
                        best = k;
                    }
                }
                out.noisy_labels[i] = best;
                break;
            }
        }
    }
    out.refresh_clean_mask();
    return out;
}

void save_csv(const NoisyDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, fmt::format("cannot open '{}' for writing", path.string()));
    for (std::size_t j = 0; j < ds.dim(); ++j) out << 'f' << j << ',';
    out << "label_true,label_noisy\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
            out << fmt::format("{}", ds.features(r, j)) << ',';
        }
        out << ds.true_labels[i] << ',' << ds.noisy_labels[i] << '\n';
    }
    if (!out) fail(ErrorKind::io, fmt::format("write to '{}' failed", path.string()));
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t line, const std::string& what) {
    fail(ErrorKind::parse, fmt::format("{}:{}: {}", path.string(), line, what));
}

}  // namespace

NoisyDataset load_csv(const std::filesystem::path& path, std::size_t classes, Split split) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, fmt::format("cannot open '{}'", path.string()));
    std::string line;
    if (!std::getline(in, line)) parse_fail(path, 1, "missing header");
    const auto header = split_fields(line);
    if (header.size() < 2 || header[header.size() - 2] != "label_true" || header.back() != "label_noisy") {
        parse_fail(path, 1, "header must end with label_true,label_noisy");
    }
    const std::size_t dim = header.size() - 2;
    for (std::size_t j = 0; j < dim; ++j) {
        if (header[j] != fmt::format("f{}", j)) parse_fail(path, 1, fmt::format("expected column f{}", j));
    }

    std::vector<double> values;
    NoisyDataset ds;
    ds.classes = classes;
    ds.split = split;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != dim + 2) {
            parse_fail(path, line_no, fmt::format("expected {} fields, found {}", dim + 2, fields.size()));
        }
        for (std::size_t j = 0; j < dim; ++j) {
            double v = 0.0;
            const auto f = fields[j];
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
                parse_fail(path, line_no, fmt::format("bad feature value '{}'", f));
            }
            values.push_back(v);
        }
        std::size_t labels[2] = {0, 0};
        for (int k = 0; k < 2; ++k) {
            const auto f = fields[dim + static_cast<std::size_t>(k)];
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), labels[k]);
            if (ec != std::errc() || ptr != f.data() + f.size()) {
                parse_fail(path, line_no, fmt::format("bad label '{}'", f));
            }
            if (labels[k] >= classes) {
                parse_fail(path, line_no, fmt::format("label {} >= number of classes {}", labels[k], classes));
            }
        }
        if (split == Split::test && labels[0] != labels[1]) {
            parse_fail(path, line_no, "test split rows must have label_noisy == label_true");
        }
        ds.true_labels.push_back(labels[0]);
        ds.noisy_labels.push_back(labels[1]);
    }
    ds.features = Eigen::Map<const Matrix>(values.data(), static_cast<Eigen::Index>(ds.true_labels.size()),
                                           static_cast<Eigen::Index>(dim));
    ds.refresh_clean_mask();
    return ds;
}

}  // namespace jumplab
