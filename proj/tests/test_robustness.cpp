#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "jlvae/data/dataset.hpp"
#include "jlvae/data/synth.hpp"
#include "jlvae/error.hpp"
#include "jlvae/robustness.hpp"
#include "jlvae/scoring.hpp"
#include "jlvae/training.hpp"

using namespace jlvae;

namespace {

Matrix random_unit_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform();
    return m;
}

std::size_t count_differing_columns(const Matrix& a, const Matrix& b) {
    std::size_t n = 0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        for (std::size_t i = 0; i < a.rows(); ++i) {
            if (a(i, j) != b(i, j)) {
                ++n;
                break;
            }
        }
    }
    return n;
}

// A quickly trained plant-shaped model shared by the protocol tests.
struct ProtocolFixture {
    ModelConfig config = ModelConfig::plant_synth();
    JlvaeParams params;
    PreparedDataset test;

    ProtocolFixture() : params(init_params(config, 0)) {
        SynthSpec spec = SynthSpec::plant(4000);
        const auto synth = synth_generate(spec, 19);
        std::vector<std::size_t> train_idx, test_idx;
        for (std::size_t i = 0; i < synth.data.rows(); ++i) {
            (i < 2500 ? train_idx : test_idx).push_back(i);
        }
        PreparedDataset train_all = synth.data.subset(train_idx);
        test = synth.data.subset(test_idx);
        auto [train_set, val_set] = split_train_val(train_all, 0.1, 5);
        TrainConfig tc;
        tc.batch_size = 200;
        tc.max_epochs = 30;
        tc.patience = 30;
        tc.seed = 11;
        params = train(train_set, val_set, config, tc).params;
    }
};

const ProtocolFixture& fixture() {
    static ProtocolFixture f;
    return f;
}

}  // namespace

TEST_CASE("corrupt with zero columns is the identity") {
    Rng data_rng(1);
    const Matrix X = random_unit_matrix(50, 6, data_rng);
    const Matrix C = random_unit_matrix(50, 4, data_rng);
    CorruptionSpec spec;
    spec.n_behavioral = 0;
    spec.n_contextual = 0;
    Rng rng(2);
    const auto [Xc, Cc] = corrupt(X, C, spec, rng);
    CHECK(Xc.data().size() == X.data().size());
    for (std::size_t i = 0; i < X.size(); ++i) CHECK(Xc.data()[i] == X.data()[i]);
    for (std::size_t i = 0; i < C.size(); ++i) CHECK(Cc.data()[i] == C.data()[i]);
}

TEST_CASE("degenerate scale/offset ranges act as identity on chosen columns") {
    Rng data_rng(3);
    const Matrix X = random_unit_matrix(20, 5, data_rng);
    const Matrix C = random_unit_matrix(20, 3, data_rng);
    CorruptionSpec spec;
    spec.n_behavioral = 2;
    spec.n_contextual = 1;
    spec.scale_low = spec.scale_high = 1.0;
    spec.offset_low = spec.offset_high = 0.0;
    Rng rng(4);
    const auto [Xc, Cc] = corrupt(X, C, spec, rng);
    for (std::size_t i = 0; i < X.size(); ++i) CHECK(Xc.data()[i] == X.data()[i]);
    for (std::size_t i = 0; i < C.size(); ++i) CHECK(Cc.data()[i] == C.data()[i]);
}

TEST_CASE("corrupt touches exactly the requested column counts") {
    Rng data_rng(5);
    const Matrix X = random_unit_matrix(40, 7, data_rng);
    const Matrix C = random_unit_matrix(40, 5, data_rng);
    CorruptionSpec spec;
    spec.n_behavioral = 3;
    spec.n_contextual = 1;
    Rng rng(6);
    const auto [Xc, Cc] = corrupt(X, C, spec, rng);
    CHECK(count_differing_columns(X, Xc) == 3);
    CHECK(count_differing_columns(C, Cc) == 1);
}

TEST_CASE("corrupt is deterministic per rng seed and validates counts") {
    Rng data_rng(7);
    const Matrix X = random_unit_matrix(10, 4, data_rng);
    const Matrix C = random_unit_matrix(10, 3, data_rng);
    CorruptionSpec spec;
    spec.n_behavioral = 2;
    spec.n_contextual = 2;

    Rng r1(9), r2(9), r3(10);
    const auto a = corrupt(X, C, spec, r1);
    const auto b = corrupt(X, C, spec, r2);
    const auto c = corrupt(X, C, spec, r3);
    for (std::size_t i = 0; i < X.size(); ++i) CHECK(a.first.data()[i] == b.first.data()[i]);
    bool differs = false;
    for (std::size_t i = 0; i < X.size(); ++i) {
        differs |= a.first.data()[i] != c.first.data()[i];
    }
    CHECK(differs);

    CorruptionSpec bad;
    bad.n_behavioral = 5;
    Rng r4(1);
    CHECK_THROWS_AS(corrupt(X, C, bad, r4), ValueError);
}

TEST_CASE("preset specs carry the published counts") {
    const auto specs = preset_corruption_specs(10000, 1);
    REQUIRE(specs.size() == 15);
    auto find = [&](const std::string& name) {
        return *std::find_if(specs.begin(), specs.end(),
                             [&](const auto& s) { return s.name == name; });
    };
    CHECK(find("Dx").n_behavioral == 2);
    CHECK(find("Dx").n_contextual == 0);
    CHECK(find("Fc").n_behavioral == 0);
    CHECK(find("Fc").n_contextual == 10);
    CHECK(find("C1").n_behavioral == 14);
    CHECK(find("B3").n_behavioral == 9);
    CHECK(find("B3").n_contextual == 3);
    for (const auto& s : specs) CHECK(s.n_rows == 10000);
    std::set<std::string> names;
    for (const auto& s : specs) names.insert(s.name);
    CHECK(names.size() == 15);
}

TEST_CASE("nested behavioral corruption burdens are monotone") {
    const auto& f = fixture();

    // Clean-set threshold at 1%.
    const auto clean = recon_error_score(f.params, f.config, f.test.X, f.test.C);
    const double threshold = calibrate_threshold(clean, 0.01);

    // Nested behavioral column subsets of sizes 1, 3, 6, 12.
    Rng pick(77);
    std::vector<std::size_t> cols(f.test.dim_x());
    std::iota(cols.begin(), cols.end(), 0);
    for (std::size_t i = cols.size(); i > 1; --i) {
        std::swap(cols[i - 1], cols[pick.uniform_index(i)]);
    }
    CorruptionSpec spec;
    std::size_t prev_flags = 0;
    for (const std::size_t take : {1u, 3u, 6u, 12u}) {
        const std::vector<std::size_t> subset(cols.begin(), cols.begin() + take);
        Rng noise(555);  // shared noise stream keeps subsets comparable
        const auto [Xc, Cc] = corrupt_columns(f.test.X, f.test.C, subset, {}, spec, noise);
        const auto scores = recon_error_score(f.params, f.config, Xc, Cc);
        const auto flags = classify(scores, threshold);
        const auto flagged = static_cast<std::size_t>(
            std::count(flags.begin(), flags.end(), std::uint8_t{1}));
        CHECK(flagged >= prev_flags);
        prev_flags = flagged;
    }
    CHECK(prev_flags > 0);
}

TEST_CASE("run_protocol counts flags per spec deterministically") {
    const auto& f = fixture();
    auto specs = preset_corruption_specs(800, 31);
    const auto table = run_protocol(f.params, f.config, f.test, specs, 0.01, 99);
    REQUIRE(table.size() == 15);
    for (const auto& row : table) CHECK(row.anomalies_reported <= 800);

    const auto again = run_protocol(f.params, f.config, f.test, specs, 0.01, 99);
    for (std::size_t i = 0; i < table.size(); ++i) {
        CHECK(table[i].anomalies_reported == again[i].anomalies_reported);
    }

    // The paper's headline asymmetry on this benchmark model: corrupting all
    // contextual columns flags far fewer rows than two behavioral columns.
    auto find = [&](const std::string& name) {
        return std::find_if(table.begin(), table.end(),
                            [&](const auto& r) { return r.name == name; });
    };
    const auto dx = find("Dx");
    const auto fc = find("Fc");
    REQUIRE(dx != table.end());
    REQUIRE(fc != table.end());
    CHECK(fc->anomalies_reported < dx->anomalies_reported);
}

TEST_CASE("run_protocol validates inputs") {
    const auto& f = fixture();
    auto specs = preset_corruption_specs(100000, 1);  // more rows than available
    CHECK_THROWS_AS(run_protocol(f.params, f.config, f.test, specs, 0.01, 1), ValueError);

    PreparedDataset unlabeled = f.test;
    unlabeled.labels.reset();
    auto small = preset_corruption_specs(10, 1);
    CHECK_THROWS_AS(run_protocol(f.params, f.config, unlabeled, small, 0.01, 1), ValueError);
}

TEST_CASE("robustness csv layout") {
    std::vector<RobustnessRow> rows = {{"Dx", 2, 0, 288}, {"Fc", 0, 10, 17}};
    const std::string csv = robustness_table_csv(rows);
    CHECK(csv ==
          "name,n_behavioral_transformed,n_contextual_transformed,anomalies_reported\n"
          "Dx,2,0,288\nFc,0,10,17\n");
}
