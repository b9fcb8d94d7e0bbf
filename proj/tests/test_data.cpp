#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "jumplab/data.hpp"
#include "jumplab/metrics.hpp"
#include "jumplab/schedule.hpp"

using namespace jumplab;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "jumplab_test_data";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::size_t flipped(const NoisyDataset& ds) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) n += ds.noisy_labels[i] != ds.true_labels[i];
    return n;
}

}  // namespace

TEST_CASE("gen_blobs shape and determinism") {
    const auto a = gen_blobs(10, 32, 20, 1.0, 7);
    const auto b = gen_blobs(10, 32, 20, 1.0, 7);
    const auto c = gen_blobs(10, 32, 20, 1.0, 8);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK_FALSE(a.train == c.train);
    CHECK(a.train.size() == 160);
    CHECK(a.test.size() == 40);
    CHECK(a.train.dim() == 32);
    CHECK(a.train.noise_rate() == 0.0);
    std::vector<std::size_t> per_class(10, 0);
    for (auto y : a.test.true_labels) ++per_class[y];
    for (auto n : per_class) CHECK(n == 4);
    CHECK_THROWS_AS(gen_blobs(1, 32, 20, 1.0, 1), Error);
}

TEST_CASE("two tight blobs are linearly separable") {
    const auto data = gen_blobs(2, 8, 50, 1e-6, 3);
    // Nearest class mean is a linear rule for two classes.
    Matrix means = Matrix::Zero(2, 8);
    std::vector<double> counts(2, 0.0);
    for (std::size_t i = 0; i < data.train.size(); ++i) {
        means.row(static_cast<Eigen::Index>(data.train.true_labels[i])) += data.train.features.row(static_cast<Eigen::Index>(i));
        counts[data.train.true_labels[i]] += 1.0;
    }
    for (int c = 0; c < 2; ++c) means.row(c) /= counts[static_cast<std::size_t>(c)];
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.test.size(); ++i) {
        const auto x = data.test.features.row(static_cast<Eigen::Index>(i));
        const std::size_t pred = (x - means.row(0)).squaredNorm() <= (x - means.row(1)).squaredNorm() ? 0 : 1;
        correct += pred == data.test.true_labels[i];
    }
    CHECK(correct == data.test.size());
}

TEST_CASE("standard training on clean blobs exceeds 95% test accuracy") {
    const auto data = gen_blobs(10, 32, 100, 1.0, 1);
    const HadamardCodebook cb(default_code_bits(10), 10);
    TrainConfig tc;
    tc.epochs = 20;
    tc.warmup_epochs = 0;
    ScheduleConfig sc;
    sc.strategy = Strategy::standard;
    TrainingSession session(data.train, cb, tc, SelectionConfig{}, sc, 1);
    for (std::size_t e = 0; e < tc.epochs; ++e) session.run_epoch();
    CHECK(evaluate(session.net(), data.test) > 0.95);
}

TEST_CASE("inject_noise identity at epsilon zero") {
    const auto data = gen_blobs(5, 8, 40, 1.0, 2);
    for (const auto kind : {NoiseKind::symmetric, NoiseKind::pairflip}) {
        NoiseSpec spec;
        spec.kind = kind;
        spec.epsilon = 0.0;
        const auto noisy = inject_noise(data.train, spec, 3);
        CHECK(noisy.noisy_labels == data.train.true_labels);
        CHECK(noisy.clean_mask == std::vector<bool>(noisy.size(), true));
    }
}

TEST_CASE("symmetric noise rate within the binomial bound") {
    const auto data = gen_blobs(10, 4, 1250, 1.0, 4);
    REQUIRE(data.train.size() == 10000);
    NoiseSpec spec;
    spec.epsilon = 0.5;
    const auto noisy = inject_noise(data.train, spec, 5);
    // 3 sigma of Binomial(10^4, 0.5) is 0.015.
    CHECK(std::abs(static_cast<double>(flipped(noisy)) / 1e4 - 0.5) <= 0.015);
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        REQUIRE(noisy.clean_mask[i] == (noisy.noisy_labels[i] == noisy.true_labels[i]));
        REQUIRE(noisy.noisy_labels[i] < 10);
    }
    CHECK(inject_noise(data.train, spec, 5) == noisy);
}

TEST_CASE("pairflip at epsilon one shifts every label") {
    const auto data = gen_blobs(10, 4, 30, 1.0, 6);
    NoiseSpec spec;
    spec.kind = NoiseKind::pairflip;
    spec.epsilon = 1.0;
    const auto noisy = inject_noise(data.train, spec, 1);
    for (std::size_t i = 0; i < noisy.size(); ++i) REQUIRE(noisy.noisy_labels[i] == (noisy.true_labels[i] + 1) % 10);
}

TEST_CASE("asymmetric noise follows the class map") {
    const auto data = gen_blobs(4, 4, 500, 1.0, 6);
    NoiseSpec spec;
    spec.kind = NoiseKind::asymmetric;
    spec.epsilon = 0.4;
    spec.class_map = {{0, 1}, {2, 3}};
    const auto noisy = inject_noise(data.train, spec, 2);
    std::size_t zeros = 0, zeros_flipped = 0;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        const auto y = noisy.true_labels[i];
        if (y == 1 || y == 3) REQUIRE(noisy.noisy_labels[i] == y);
        if (noisy.noisy_labels[i] != y) REQUIRE(noisy.noisy_labels[i] == spec.class_map.at(y));
        if (y == 0) {
            ++zeros;
            zeros_flipped += noisy.noisy_labels[i] != y;
        }
    }
    const double rate = static_cast<double>(zeros_flipped) / static_cast<double>(zeros);
    CHECK(std::abs(rate - 0.4) < 3 * std::sqrt(0.24 / static_cast<double>(zeros)));

    spec.class_map.clear();
    CHECK_THROWS_AS(inject_noise(data.train, spec, 2), Error);
}

TEST_CASE("instance noise averages to epsilon") {
    const auto data = gen_blobs(5, 16, 400, 1.0, 9);
    NoiseSpec spec;
    spec.kind = NoiseKind::instance;
    spec.epsilon = 0.3;
    spec.idn_weights = random_idn_weights(16, 5, 11);
    const auto probs = instance_flip_probabilities(data.train, *spec.idn_weights, 0.3);
    double mean = 0.0;
    for (double p : probs) {
        REQUIRE(p >= 0.0);
        REQUIRE(p <= 1.0);
        mean += p;
    }
    mean /= static_cast<double>(probs.size());
    CHECK(mean == doctest::Approx(0.3).epsilon(1e-6));
    const auto noisy = inject_noise(data.train, spec, 4);
    const double n = static_cast<double>(noisy.size());
    CHECK(std::abs(static_cast<double>(flipped(noisy)) / n - 0.3) < 3 * std::sqrt(0.21 / n));
}

TEST_CASE("noise spec validation") {
    NoiseSpec spec;
    spec.epsilon = 1.2;
    CHECK_THROWS_AS(spec.validate(10, 4), Error);
    spec.epsilon = -0.1;
    CHECK_THROWS_AS(spec.validate(10, 4), Error);
    CHECK_THROWS_AS(parse_noise_kind("gaussian"), Error);
    CHECK(parse_noise_kind("pairflip") == NoiseKind::pairflip);
}

TEST_CASE("csv round trip") {
    auto data = gen_blobs(3, 5, 10, 0.7, 12);
    NoiseSpec spec;
    spec.epsilon = 0.4;
    const auto noisy = inject_noise(data.train, spec, 1);
    const auto path = scratch("round.csv");
    save_csv(noisy, path);
    const auto back = load_csv(path, 3);
    CHECK(back.features == noisy.features);
    CHECK(back.true_labels == noisy.true_labels);
    CHECK(back.noisy_labels == noisy.noisy_labels);
    CHECK(back.clean_mask == noisy.clean_mask);

    NoisyDataset empty;
    empty.classes = 3;
    empty.features = Matrix(0, 5);
    save_csv(empty, scratch("empty.csv"));
    std::ifstream in(scratch("empty.csv"));
    std::string header, extra;
    std::getline(in, header);
    CHECK(header == "f0,f1,f2,f3,f4,label_true,label_noisy");
    CHECK_FALSE(static_cast<bool>(std::getline(in, extra)));
    CHECK(load_csv(scratch("empty.csv"), 3).size() == 0);
}

TEST_CASE("csv errors name the line") {
    const auto path = scratch("bad.csv");
    {
        std::ofstream out(path);
        out << "f0,f1,label_true,label_noisy\n0.5,1.5,0,1\n0.1,0.2,3,0\n";
    }
    try {
        (void)load_csv(path, 3);
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::parse);
        CHECK(std::string(e.what()).find("bad.csv:3") != std::string::npos);
    }
    {
        std::ofstream out(path);
        out << "f0,f1,label_true,label_noisy\n0.5,abc,0,1\n";
    }
    CHECK_THROWS_AS(load_csv(path, 3), Error);
    try {
        (void)load_csv(scratch("missing.csv"), 3);
        FAIL("expected io error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::io);
    }
}
