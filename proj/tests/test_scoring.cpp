#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "jlvae/error.hpp"
#include "jlvae/rng.hpp"
#include "jlvae/scoring.hpp"

using namespace jlvae;

namespace {

ModelConfig toy_config(std::size_t dim_x = 2, std::size_t dim_c = 2) {
    ModelConfig c;
    c.dim_x = dim_x;
    c.dim_c = dim_c;
    c.latent_x = 2;
    c.latent_c = 2;
    c.recognizer_x_hidden = {3};
    c.recognizer_c_hidden = {3};
    c.generator_x_hidden = {3};
    c.generator_c_hidden = {3};
    return c;
}

JlvaeParams zero_params(const ModelConfig& config) {
    JlvaeParams p = init_params(config, 0);
    for (std::size_t mi = 0; mi < 4; ++mi) {
        for (auto& layer : p.mlp(mi).layers) layer.weights.fill(0.0);
    }
    return p;
}

// Zero weights everywhere, generator_x output bias = target row: the model
// reconstructs that exact row regardless of the latents.
JlvaeParams constant_decoder(const ModelConfig& config, const std::vector<double>& row) {
    JlvaeParams p = zero_params(config);
    p.generator_x.layers.back().bias = row;
    return p;
}

}  // namespace

TEST_CASE("recon_error_score on a perfectly reconstructing model") {
    const ModelConfig config = toy_config();
    const std::vector<double> row = {0.25, -0.75};
    const JlvaeParams p = constant_decoder(config, row);
    Matrix x(5, 2);
    for (std::size_t i = 0; i < 5; ++i) {
        x(i, 0) = row[0];
        x(i, 1) = row[1];
    }
    Rng rng(1);
    Matrix c(5, 2);
    for (double& v : c.data()) v = rng.normal();
    const auto scores = recon_error_score(p, config, x, c);
    for (const double s : scores) CHECK(s == 0.0);
}

TEST_CASE("recon_error_score with zero params is the row norm") {
    const ModelConfig config = toy_config();
    const JlvaeParams p = zero_params(config);
    const Matrix x(2, 2, {3.0, 4.0, 1.0, 0.0});
    const Matrix c(2, 2);
    const auto scores = recon_error_score(p, config, x, c);
    CHECK(scores[0] == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(scores[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("duplicate rows get equal scores") {
    const ModelConfig config = toy_config();
    const JlvaeParams p = init_params(config, 9);
    Rng rng(10);
    Matrix x(4, 2), c(4, 2);
    for (double& v : x.data()) v = rng.normal();
    for (double& v : c.data()) v = rng.normal();
    for (std::size_t j = 0; j < 2; ++j) {
        x(3, j) = x(1, j);
        c(3, j) = c(1, j);
    }
    const auto scores = recon_error_score(p, config, x, c);
    CHECK(scores[3] == scores[1]);
}

TEST_CASE("recon_probability at a perfect reconstruction is log(2 pi) for dim 2") {
    const ModelConfig config = toy_config();
    const std::vector<double> row = {0.1, 0.9};
    const JlvaeParams p = constant_decoder(config, row);
    Matrix x(3, 2);
    for (std::size_t i = 0; i < 3; ++i) {
        x(i, 0) = row[0];
        x(i, 1) = row[1];
    }
    const Matrix c(3, 2);
    const auto scores = recon_probability_score(p, config, x, c, 16, 7);
    const double expected = std::log(2.0 * 3.14159265358979323846);
    for (const double s : scores) CHECK(s == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("recon_probability deterministic per seed and row-stream independent of chunking") {
    const ModelConfig config = toy_config();
    const JlvaeParams p = init_params(config, 3);
    Rng rng(4);
    Matrix x(6, 2), c(6, 2);
    for (double& v : x.data()) v = rng.normal();
    for (double& v : c.data()) v = rng.normal();

    const auto a = recon_probability_score(p, config, x, c, 8, 42);
    const auto b = recon_probability_score(p, config, x, c, 8, 42);
    CHECK(a == b);
    const auto other = recon_probability_score(p, config, x, c, 8, 43);
    CHECK(a != other);
}

TEST_CASE("recon_probability sample mean tightens as 1/sqrt(L)") {
    const ModelConfig config = toy_config();
    const JlvaeParams p = init_params(config, 11);
    const Matrix x(1, 2, {0.4, -0.2});
    const Matrix c(1, 2, {0.1, 0.3});

    auto spread = [&](std::size_t L) {
        std::vector<double> vals;
        for (std::uint64_t seed = 0; seed < 40; ++seed) {
            vals.push_back(recon_probability_score(p, config, x, c, L, 1000 + seed)[0]);
        }
        double mean = 0.0;
        for (const double v : vals) mean += v;
        mean /= vals.size();
        double var = 0.0;
        for (const double v : vals) var += (v - mean) * (v - mean);
        return std::sqrt(var / (vals.size() - 1));
    };

    const double s1 = spread(1);
    const double s100 = spread(100);
    // Expect roughly s1 / 10; allow a factor-2 band either way.
    CHECK(s100 < s1 / 5.0);
    CHECK(s100 > s1 / 20.0);
}

TEST_CASE("zero-params scores increase strictly with the row norm") {
    const ModelConfig config = toy_config();
    const JlvaeParams p = zero_params(config);
    Matrix x(10, 2);
    for (std::size_t i = 0; i < 10; ++i) {
        x(i, 0) = 0.1 * static_cast<double>(i + 1);
        x(i, 1) = 0.05 * static_cast<double>(i + 1);
    }
    const Matrix c(10, 2);
    const auto scores = recon_error_score(p, config, x, c);
    for (std::size_t i = 1; i < scores.size(); ++i) CHECK(scores[i] > scores[i - 1]);
}

TEST_CASE("calibrate_threshold picks the ceil(N * rate)-th largest score") {
    std::vector<double> scores(100);
    for (std::size_t i = 0; i < 100; ++i) scores[i] = static_cast<double>(i + 1);

    SUBCASE("rate 0.01 on 1..100") {
        const double t = calibrate_threshold(scores, 0.01);
        CHECK(t == 100.0);
        const auto flags = classify(scores, t);
        CHECK(std::count(flags.begin(), flags.end(), std::uint8_t{1}) == 0);
    }
    SUBCASE("rate 0.05 on 1..100") {
        const double t = calibrate_threshold(scores, 0.05);
        CHECK(t == 96.0);
        const auto flags = classify(scores, t);
        CHECK(std::count(flags.begin(), flags.end(), std::uint8_t{1}) == 4);
    }
    SUBCASE("10000 distinct scores at rate 0.01 -> the 100th largest") {
        Rng rng(5);
        std::vector<double> big(10000);
        for (std::size_t i = 0; i < big.size(); ++i) big[i] = rng.normal();
        const double t = calibrate_threshold(big, 0.01);
        std::vector<double> sorted = big;
        std::sort(sorted.begin(), sorted.end(), std::greater<double>());
        CHECK(t == sorted[99]);
        const auto flags = classify(big, t);
        CHECK(std::count(flags.begin(), flags.end(), std::uint8_t{1}) == 99);
    }
    SUBCASE("degenerate all-equal scores flag nothing") {
        const std::vector<double> flat(10, 3.5);
        const double t = calibrate_threshold(flat, 0.2);
        CHECK(t == 3.5);
        const auto flags = classify(flat, t);
        CHECK(std::count(flags.begin(), flags.end(), std::uint8_t{1}) == 0);
    }
    SUBCASE("bad arguments") {
        CHECK_THROWS_AS(calibrate_threshold({}, 0.1), ValueError);
        CHECK_THROWS_AS(calibrate_threshold(scores, 0.0), ValueError);
        CHECK_THROWS_AS(calibrate_threshold(scores, 1.0), ValueError);
    }
}

TEST_CASE("classify trivial thresholds") {
    const std::vector<double> scores = {1.0, 2.0, 3.0};
    const auto none = classify(scores, std::numeric_limits<double>::infinity());
    CHECK(std::count(none.begin(), none.end(), std::uint8_t{1}) == 0);
    const auto all = classify(scores, -std::numeric_limits<double>::infinity());
    CHECK(std::count(all.begin(), all.end(), std::uint8_t{1}) == 3);
    const auto some = classify(scores, 2.0);
    CHECK(some == std::vector<std::uint8_t>{0, 0, 1});
}

TEST_CASE("flagged count never exceeds ceil(N * rate) for distinct scores") {
    Rng rng(808);
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = 10 + rng.uniform_index(200);
        std::vector<double> scores(n);
        for (double& s : scores) s = rng.normal();
        const double rate = 0.01 + 0.3 * rng.uniform();
        const double threshold = calibrate_threshold(scores, rate);
        const auto flags = classify(scores, threshold);
        const auto flagged =
            static_cast<std::size_t>(std::count(flags.begin(), flags.end(), std::uint8_t{1}));
        CHECK(flagged <= static_cast<std::size_t>(std::ceil(rate * static_cast<double>(n))));
    }
}
