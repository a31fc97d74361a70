#include "jlvae/robustness.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "jlvae/error.hpp"
#include "jlvae/scoring.hpp"

namespace jlvae {

std::vector<CorruptionSpec> preset_corruption_specs(std::size_t n_rows, std::uint64_t seed) {
    struct Entry {
        const char* name;
        std::size_t nb, nc;
    };
    // Same behavioral/contextual counts as the published table for the
    // 28/38-attribute layout.
    static constexpr Entry kEntries[] = {
        {"A1", 3, 0},  {"A2", 0, 1},  {"A3", 3, 1},  {"B1", 9, 0},  {"B2", 0, 3},
        {"B3", 9, 3},  {"C1", 14, 0}, {"C2", 0, 5},  {"C3", 14, 5}, {"Dx", 2, 0},
        {"Dc", 0, 2},  {"Ex", 5, 0},  {"Ec", 0, 5},  {"Fx", 10, 0}, {"Fc", 0, 10}};

    std::vector<CorruptionSpec> specs;
    std::size_t i = 0;
    for (const auto& e : kEntries) {
        CorruptionSpec s;
        s.name = e.name;
        s.n_behavioral = e.nb;
        s.n_contextual = e.nc;
        s.n_rows = n_rows;
        s.seed = mix64(seed ^ (0x1000 + i));
        specs.push_back(std::move(s));
        ++i;
    }
    return specs;
}

namespace {

std::vector<std::size_t> choose_columns(std::size_t dim, std::size_t count, Rng& rng) {
    if (count > dim) {
        throw ValueError("corrupt: requested " + std::to_string(count) + " columns of " +
                         std::to_string(dim));
    }
    std::vector<std::size_t> cols(dim);
    std::iota(cols.begin(), cols.end(), 0);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.uniform_index(cols.size() - i);
        std::swap(cols[i], cols[j]);
    }
    cols.resize(count);
    std::sort(cols.begin(), cols.end());
    return cols;
}

void corrupt_in_place(Matrix& m, const std::vector<std::size_t>& cols,
                      const CorruptionSpec& spec, Rng& rng) {
    for (const std::size_t col : cols) {
        if (col >= m.cols()) {
            throw ValueError("corrupt: column " + std::to_string(col) + " out of range for " +
                             m.shape_str());
        }
        for (std::size_t i = 0; i < m.rows(); ++i) {
            const double scale = rng.uniform(spec.scale_low, spec.scale_high);
            const double offset = rng.uniform(spec.offset_low, spec.offset_high);
            m(i, col) = scale * m(i, col) + offset;
        }
    }
}

}  // namespace

std::pair<Matrix, Matrix> corrupt(const Matrix& X, const Matrix& C, const CorruptionSpec& spec,
                                  Rng& rng) {
    if (spec.scale_low > spec.scale_high || spec.offset_low > spec.offset_high) {
        throw ValueError("corrupt: empty scale or offset range");
    }
    Rng pick_rng = rng.child(0);
    const auto x_cols = choose_columns(X.cols(), spec.n_behavioral, pick_rng);
    const auto c_cols = choose_columns(C.cols(), spec.n_contextual, pick_rng);
    Rng noise_rng = rng.child(1);
    return corrupt_columns(X, C, x_cols, c_cols, spec, noise_rng);
}

std::pair<Matrix, Matrix> corrupt_columns(const Matrix& X, const Matrix& C,
                                          const std::vector<std::size_t>& x_cols,
                                          const std::vector<std::size_t>& c_cols,
                                          const CorruptionSpec& spec, Rng& rng) {
    Matrix Xc = X;
    Matrix Cc = C;
    Rng rx = rng.child(0);
    Rng rc = rng.child(1);
    corrupt_in_place(Xc, x_cols, spec, rx);
    corrupt_in_place(Cc, c_cols, spec, rc);
    return {std::move(Xc), std::move(Cc)};
}

std::vector<RobustnessRow> run_protocol(const JlvaeParams& params, const ModelConfig& config,
                                        const PreparedDataset& test_set,
                                        const std::vector<CorruptionSpec>& specs,
                                        double target_rate, std::uint64_t protocol_seed) {
    test_set.validate();
    if (!test_set.labels) {
        throw ValueError("run_protocol: test set must carry labels to select normal rows");
    }
    if (specs.empty()) return {};

    // Threshold from the clean test set.
    const std::vector<double> clean_scores =
        recon_error_score(params, config, test_set.X, test_set.C);
    const double threshold = calibrate_threshold(clean_scores, target_rate);

    // One shared sample of normal rows across all specs.
    std::vector<std::size_t> normal_rows;
    for (std::size_t i = 0; i < test_set.rows(); ++i) {
        if (!(*test_set.labels)[i]) normal_rows.push_back(i);
    }
    const std::size_t n_rows = specs.front().n_rows;
    for (const auto& s : specs) {
        if (s.n_rows != n_rows) {
            throw ValueError("run_protocol: all specs must share n_rows");
        }
    }
    if (normal_rows.size() < n_rows) {
        throw ValueError("run_protocol: only " + std::to_string(normal_rows.size()) +
                         " normal rows available, need " + std::to_string(n_rows));
    }
    Rng sample_rng(protocol_seed);
    for (std::size_t i = 0; i < n_rows; ++i) {
        const std::size_t j = i + sample_rng.uniform_index(normal_rows.size() - i);
        std::swap(normal_rows[i], normal_rows[j]);
    }
    normal_rows.resize(n_rows);
    std::sort(normal_rows.begin(), normal_rows.end());
    const Matrix X0 = gather_rows(test_set.X, normal_rows);
    const Matrix C0 = gather_rows(test_set.C, normal_rows);

    std::vector<RobustnessRow> table;
    for (const auto& spec : specs) {
        Rng spec_rng(spec.seed);
        auto [Xc, Cc] = corrupt(X0, C0, spec, spec_rng);
        const std::vector<double> scores = recon_error_score(params, config, Xc, Cc);
        const auto flags = classify(scores, threshold);
        RobustnessRow row;
        row.name = spec.name;
        row.n_behavioral_transformed = spec.n_behavioral;
        row.n_contextual_transformed = spec.n_contextual;
        row.anomalies_reported =
            static_cast<std::size_t>(std::count(flags.begin(), flags.end(), std::uint8_t{1}));
        table.push_back(std::move(row));
    }
    return table;
}

std::string robustness_table_csv(const std::vector<RobustnessRow>& rows) {
    std::ostringstream ss;
    ss << "name,n_behavioral_transformed,n_contextual_transformed,anomalies_reported\n";
    for (const auto& r : rows) {
        ss << r.name << ',' << r.n_behavioral_transformed << ',' << r.n_contextual_transformed
           << ',' << r.anomalies_reported << '\n';
    }
    return ss.str();
}

}  // namespace jlvae
