#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "jlvae/data/dataset.hpp"
#include "jlvae/data/kdd.hpp"
#include "jlvae/data/synth.hpp"
#include "jlvae/error.hpp"
#include "jlvae/rng.hpp"

using namespace jlvae;

namespace {

// One schema-conformant line: all numerics at `fill`, chosen categoricals.
std::string kdd_line(const std::string& protocol, const std::string& service,
                     const std::string& flag, const std::string& label, double duration = 0.0,
                     double src_bytes = 0.0, double dst_bytes = 0.0, double fill = 0.0) {
    std::ostringstream ss;
    ss.precision(17);
    for (std::size_t col = 0; col < kdd::kFieldCount; ++col) {
        if (col) ss << ',';
        const std::string& name = kdd::column_names()[col];
        if (name == "protocol_type") ss << protocol;
        else if (name == "service") ss << service;
        else if (name == "flag") ss << flag;
        else if (name == "duration") ss << duration;
        else if (name == "src_bytes") ss << src_bytes;
        else if (name == "dst_bytes") ss << dst_bytes;
        else ss << fill;
    }
    ss << ',' << label;
    return ss.str();
}

KddParseResult parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse_kdd_stream(in);
}

}  // namespace

TEST_CASE("parse_kdd_csv happy path and arity errors") {
    const std::string text = kdd_line("tcp", "http", "SF", "normal.", 2.0, 215, 45076) + "\n" +
                             "1,2,3\n" +
                             kdd_line("udp", "domain_u", "SF", "smurf.") + "\n";
    const auto result = parse_string(text);
    REQUIRE(result.records.size() == 2);
    CHECK(result.records[0].label == "normal.");
    CHECK(result.records[0].line_no == 1);
    CHECK(result.records[1].label == "smurf.");
    REQUIRE(result.errors.size() == 1);
    CHECK(result.errors[0].line_no == 2);

    const auto& rec = result.records[0];
    CHECK(rec.categorical[kdd::storage_index(kdd::column_index("service"))] == "http");
    CHECK(rec.numeric[kdd::storage_index(kdd::column_index("duration"))] == 2.0);
    CHECK(rec.numeric[kdd::storage_index(kdd::column_index("src_bytes"))] == 215.0);
}

TEST_CASE("parse handles empty files and bad numerics") {
    CHECK(parse_string("").records.empty());
    CHECK(parse_string("").errors.empty());

    std::string bad = kdd_line("tcp", "http", "SF", "normal.");
    bad.replace(0, 1, "x");  // duration becomes non-numeric
    const auto result = parse_string(bad + "\n");
    CHECK(result.records.empty());
    REQUIRE(result.errors.size() == 1);
    CHECK(result.errors[0].message.find("duration") != std::string::npos);

    CHECK_THROWS_AS(parse_kdd_csv("/nonexistent/path.csv"), IoError);
}

TEST_CASE("filter_labels keeps the retained families and relabels anomalies") {
    std::string text;
    text += kdd_line("tcp", "http", "SF", "normal.") + "\n";
    text += kdd_line("tcp", "http", "SF", "smurf.") + "\n";
    text += kdd_line("tcp", "ftp", "SF", "guess_passwd.") + "\n";
    text += kdd_line("tcp", "telnet", "SF", "buffer_overflow.") + "\n";
    text += kdd_line("icmp", "ecr_i", "SF", "ipsweep.") + "\n";
    text += kdd_line("tcp", "private", "S0", "neptune.") + "\n";
    text += kdd_line("tcp", "http", "SF", "nmap.") + "\n";

    auto parsed = parse_string(text);
    const auto filtered = filter_labels(std::move(parsed.records));
    CHECK(filtered.records.size() == 5);
    CHECK(filtered.normal_count == 1);
    CHECK(filtered.anomaly_count == 4);
    CHECK(filtered.anomaly == std::vector<std::uint8_t>{0, 1, 1, 1, 1});
    CHECK(filtered.dropped.at("smurf") == 1);
    CHECK(filtered.dropped.at("neptune") == 1);
    CHECK(filtered.retained.at("normal") == 1);
    CHECK(filtered.retained.at("nmap") == 1);
}

TEST_CASE("fit_preprocess: log1p columns, categories, constant columns") {
    // duration values {0, e-1}: log1p maps to {0, 1}.
    std::string text;
    text += kdd_line("tcp", "http", "SF", "normal.", 0.0) + "\n";
    text += kdd_line("udp", "smtp", "SF", "normal.", std::exp(1.0) - 1.0) + "\n";
    auto parsed = parse_string(text);
    const auto spec = fit_preprocess(parsed.records);

    REQUIRE(spec.behavioral.size() == 4);  // service one-hot + 3 numerics
    CHECK(spec.behavioral[0].kind == TransformKind::OneHot);
    CHECK(spec.behavioral[0].categories == std::vector<std::string>{"http", "smtp"});
    CHECK(spec.behavioral[1].column == "duration");
    CHECK(spec.behavioral[1].kind == TransformKind::Log1pThenMinMax);
    CHECK(spec.behavioral[1].min == 0.0);
    CHECK(spec.behavioral[1].max == doctest::Approx(1.0).epsilon(1e-12));

    // Everything numeric in these two rows besides duration is constant 0.
    for (const auto& t : spec.contextual) {
        if (t.kind != TransformKind::OneHot) CHECK(t.min == t.max);
    }

    const auto data = apply_preprocess(spec, parsed.records);
    CHECK(data.dim_x() == 2 + 3);
    // duration col sits right after the service one-hot block
    CHECK(data.X(0, 2) == 0.0);
    CHECK(data.X(1, 2) == doctest::Approx(1.0).epsilon(1e-12));
    // constant columns map to 0
    for (std::size_t j = 0; j < data.dim_c(); ++j) {
        const auto& t = spec.contextual;
        (void)t;
        CHECK(data.C(0, j) >= 0.0);
        CHECK(data.C(0, j) <= 1.0);
    }
}

TEST_CASE("apply_preprocess clips unseen numeric values and zero-encodes unseen categories") {
    std::string train_text;
    train_text += kdd_line("tcp", "http", "SF", "normal.", 1.0, 10.0, 5.0) + "\n";
    train_text += kdd_line("udp", "smtp", "REJ", "normal.", 3.0, 20.0, 8.0) + "\n";
    auto train = parse_string(train_text);
    const auto spec = fit_preprocess(train.records);

    std::string test_text = kdd_line("icmp", "finger", "S0", "normal.", 100.0, 0.0, 6.0) + "\n";
    auto test = parse_string(test_text);
    const auto data = apply_preprocess(spec, test.records);

    // Unseen service category -> all-zero one-hot block.
    const std::size_t service_width = spec.behavioral[0].categories.size();
    for (std::size_t j = 0; j < service_width; ++j) CHECK(data.X(0, j) == 0.0);
    // duration 100 is far above the training max 3 -> clipped to 1.
    CHECK(data.X(0, service_width) == 1.0);
    // src_bytes 0 is below training min 10 -> clipped to 0.
    CHECK(data.X(0, service_width + 1) == 0.0);
    // every output value within [0, 1]
    for (const double v : data.X.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    for (const double v : data.C.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("fit/apply on the training set itself never clips") {
    Rng rng(50);
    std::ostringstream text;
    for (int i = 0; i < 40; ++i) {
        text << kdd_line(i % 2 ? "tcp" : "udp", i % 3 ? "http" : "smtp", "SF", "normal.",
                         rng.uniform(0, 1000), rng.uniform(0, 5000), rng.uniform(0, 5000),
                         rng.uniform(0, 10))
             << "\n";
    }
    auto parsed = parse_string(text.str());
    const auto spec = fit_preprocess(parsed.records);
    const auto data = apply_preprocess(spec, parsed.records);
    // Non-constant numeric columns span exactly [0, 1] when applied to the
    // fitting records themselves.
    for (std::size_t j = 0; j < data.dim_x(); ++j) {
        double lo = 1e9, hi = -1e9;
        for (std::size_t i = 0; i < data.rows(); ++i) {
            lo = std::min(lo, data.X(i, j));
            hi = std::max(hi, data.X(i, j));
        }
        CHECK(lo >= 0.0);
        CHECK(hi <= 1.0);
    }
}

TEST_CASE("preprocess spec json round trip") {
    std::string text;
    text += kdd_line("tcp", "http", "SF", "normal.", 1.25, 10.5, 5.0) + "\n";
    text += kdd_line("udp", "smtp", "REJ", "normal.", 3.75, 20.25, 8.0) + "\n";
    auto parsed = parse_string(text);
    const auto spec = fit_preprocess(parsed.records);
    const auto restored = PreprocessSpec::from_json(spec.to_json());
    CHECK(restored.to_json() == spec.to_json());
    CHECK(restored.fingerprint() == spec.fingerprint());
    CHECK(restored.behavioral_width() == spec.behavioral_width());
}

TEST_CASE("stratified_kfold exact allocation and determinism") {
    std::vector<std::uint8_t> labels(100, 0);
    for (std::size_t i = 0; i < 10; ++i) labels[i * 10] = 1;

    const auto folds = stratified_kfold(labels, 5, 7);
    REQUIRE(folds.size() == 5);
    std::set<std::size_t> all;
    for (const auto& fold : folds) {
        CHECK(fold.size() == 20);
        std::size_t anomalies = 0;
        for (const auto i : fold) anomalies += labels[i];
        CHECK(anomalies == 2);
        all.insert(fold.begin(), fold.end());
    }
    CHECK(all.size() == 100);

    CHECK(stratified_kfold(labels, 5, 7) == folds);
    CHECK(stratified_kfold(labels, 5, 8) != folds);

    std::vector<std::uint8_t> scarce(20, 0);
    scarce[0] = 1;
    scarce[1] = 1;
    CHECK_THROWS_AS(stratified_kfold(scarce, 3, 1), ValueError);
}

TEST_CASE("kfold class ratios within one sample of proportional") {
    Rng rng(17);
    std::vector<std::uint8_t> labels(997);
    for (auto& l : labels) l = rng.uniform() < 0.13 ? 1 : 0;
    const std::size_t k = 4;
    const auto folds = stratified_kfold(labels, k, 3);
    std::size_t total_pos = 0;
    for (auto l : labels) total_pos += l;
    for (const auto& fold : folds) {
        std::size_t pos = 0;
        for (auto i : fold) pos += labels[i];
        const double expected = static_cast<double>(total_pos) / k;
        CHECK(std::abs(static_cast<double>(pos) - expected) <= 1.0);
    }
}

TEST_CASE("fold_complement unions the other folds") {
    std::vector<std::uint8_t> labels(30, 0);
    for (std::size_t i = 0; i < 6; ++i) labels[i] = 1;
    const auto folds = stratified_kfold(labels, 3, 5);
    const auto rest = fold_complement(folds, 1);
    CHECK(rest.size() == 30 - folds[1].size());
    std::set<std::size_t> test_set(folds[1].begin(), folds[1].end());
    for (const auto i : rest) CHECK(!test_set.count(i));
}

TEST_CASE("stratified_subsample preserves the class ratio") {
    std::vector<std::uint8_t> labels(10000, 0);
    for (std::size_t i = 0; i < 200; ++i) labels[i * 50] = 1;  // 2%
    const auto idx = stratified_subsample(labels, 1000, 11);
    CHECK(idx.size() == 1000);
    std::size_t pos = 0;
    for (auto i : idx) pos += labels[i];
    CHECK(pos == 20);
    CHECK(stratified_subsample(labels, 1000, 11) == idx);
}

TEST_CASE("synth_generate anomaly counts and determinism") {
    SynthSpec spec;
    spec.n_rows = 10000;
    spec.dim_x = 6;
    spec.dim_c = 5;
    spec.latent_x = 2;
    spec.latent_c = 2;
    spec.anomaly_fraction = 0.01;

    const auto a = synth_generate(spec, 3);
    CHECK(a.data.anomaly_count() == 100);

    spec.anomaly_fraction = 0.0;
    const auto clean = synth_generate(spec, 3);
    CHECK(clean.data.anomaly_count() == 0);

    spec.anomaly_fraction = 0.01;
    const auto b = synth_generate(spec, 3);
    CHECK(a.data.X.data().size() == b.data.X.data().size());
    for (std::size_t i = 0; i < a.data.X.size(); ++i) {
        CHECK(a.data.X.data()[i] == b.data.X.data()[i]);
    }
    CHECK(*a.data.labels == *b.data.labels);

    for (const double v : a.data.X.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    for (const double v : a.data.C.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("zero-noise decoupled synth is exactly linear in z_x") {
    SynthSpec spec;
    spec.n_rows = 300;
    spec.dim_x = 6;
    spec.dim_c = 4;
    spec.latent_x = 2;
    spec.latent_c = 2;
    spec.noise_x = 0.0;
    spec.noise_c = 0.0;
    spec.cross_coupling = 0.0;  // D = 0
    const auto synth = synth_generate(spec, 9);

    // Each X column must be an affine function of z_x: solve the 3x3 normal
    // equations for [z1, z2, 1] -> x_j and check the residual vanishes.
    const Matrix& Z = synth.z_x;
    const Matrix& X = synth.data.X;
    for (std::size_t j = 0; j < X.cols(); ++j) {
        double ata[3][3] = {};
        double atb[3] = {};
        for (std::size_t i = 0; i < X.rows(); ++i) {
            const double row[3] = {Z(i, 0), Z(i, 1), 1.0};
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) ata[a][b] += row[a] * row[b];
                atb[a] += row[a] * X(i, j);
            }
        }
        // Gaussian elimination.
        double m[3][4];
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) m[a][b] = ata[a][b];
            m[a][3] = atb[a];
        }
        for (int col = 0; col < 3; ++col) {
            int pivot = col;
            for (int r = col + 1; r < 3; ++r) {
                if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
            }
            std::swap(m[col], m[pivot]);
            for (int r = 0; r < 3; ++r) {
                if (r == col) continue;
                const double f = m[r][col] / m[col][col];
                for (int b = col; b < 4; ++b) m[r][b] -= f * m[col][b];
            }
        }
        const double coef[3] = {m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]};
        double worst = 0.0;
        for (std::size_t i = 0; i < X.rows(); ++i) {
            const double pred = coef[0] * Z(i, 0) + coef[1] * Z(i, 1) + coef[2];
            worst = std::max(worst, std::abs(pred - X(i, j)));
        }
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("synth labels mark exactly the injected rows") {
    SynthSpec spec;
    spec.n_rows = 500;
    spec.dim_x = 4;
    spec.dim_c = 3;
    spec.latent_x = 2;
    spec.latent_c = 1;
    spec.anomaly_fraction = 0.1;
    spec.noise_x = 0.0;
    spec.anomaly_scale = 1.0;

    const auto with = synth_generate(spec, 77);
    spec.anomaly_fraction = 0.0;
    const auto without = synth_generate(spec, 77);

    REQUIRE(with.data.labels.has_value());
    std::size_t labeled = 0;
    for (const auto l : *with.data.labels) labeled += l;
    CHECK(labeled == 50);
    CHECK(without.data.anomaly_count() == 0);

    // The contextual block is untouched by injection: same seed, same z_c,
    // and C's min-max scaling sees identical values.
    for (std::size_t i = 0; i < with.data.C.size(); ++i) {
        CHECK(with.data.C.data()[i] == without.data.C.data()[i]);
    }
}

TEST_CASE("dataset save/load round trip is value-exact") {
    SynthSpec spec;
    spec.n_rows = 40;
    spec.dim_x = 3;
    spec.dim_c = 2;
    spec.latent_x = 1;
    spec.latent_c = 1;
    spec.anomaly_fraction = 0.1;
    const auto synth = synth_generate(spec, 5);

    const std::string dir = "/tmp/jlvae_test_dataset_rt";
    std::filesystem::remove_all(dir);
    save_dataset(synth.data, dir, "synth", R"({"note":"test"})");
    const PreparedDataset loaded = load_dataset(dir);

    REQUIRE(loaded.rows() == synth.data.rows());
    for (std::size_t i = 0; i < loaded.X.size(); ++i) {
        CHECK(loaded.X.data()[i] == synth.data.X.data()[i]);
    }
    for (std::size_t i = 0; i < loaded.C.size(); ++i) {
        CHECK(loaded.C.data()[i] == synth.data.C.data()[i]);
    }
    REQUIRE(loaded.labels.has_value());
    CHECK(*loaded.labels == *synth.data.labels);
    CHECK(loaded.row_ids == synth.data.row_ids);
    CHECK(dataset_fingerprint(loaded) == dataset_fingerprint(synth.data));
    std::filesystem::remove_all(dir);
}

TEST_CASE("subset preserves labels and row ids") {
    SynthSpec spec;
    spec.n_rows = 20;
    spec.dim_x = 3;
    spec.dim_c = 2;
    spec.latent_x = 1;
    spec.latent_c = 1;
    spec.anomaly_fraction = 0.25;
    const auto synth = synth_generate(spec, 6);

    const std::vector<std::size_t> idx = {3, 7, 11};
    const PreparedDataset sub = synth.data.subset(idx);
    CHECK(sub.rows() == 3);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        CHECK(sub.row_ids[i] == synth.data.row_ids[idx[i]]);
        CHECK((*sub.labels)[i] == (*synth.data.labels)[idx[i]]);
        for (std::size_t j = 0; j < sub.dim_x(); ++j) {
            CHECK(sub.X(i, j) == synth.data.X(idx[i], j));
        }
    }
}
