#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jlvae/data/dataset.hpp"
#include "jlvae/model.hpp"
#include "jlvae/rng.hpp"

namespace jlvae {

// One corruption setting: scale/offset noise applied element-wise to a
// random subset of behavioral and/or contextual columns.
struct CorruptionSpec {
    std::string name;
    std::size_t n_behavioral = 0;
    std::size_t n_contextual = 0;
    double scale_low = -2.5;
    double scale_high = 2.5;
    double offset_low = -2.0;
    double offset_high = 2.0;
    std::size_t n_rows = 10000;
    std::uint64_t seed = 0;
};

struct RobustnessRow {
    std::string name;
    std::size_t n_behavioral_transformed = 0;
    std::size_t n_contextual_transformed = 0;
    std::size_t anomalies_reported = 0;
};

// The fifteen corruption settings evaluated against the pump-station-sized
// model (28 behavioral / 38 contextual attributes): A/B/C mix both groups at
// roughly 10/30/50%, D/E/F corrupt the same absolute count in one group.
std::vector<CorruptionSpec> preset_corruption_specs(std::size_t n_rows, std::uint64_t seed);

// Corrupt the chosen column counts (columns drawn once, per-element
// scale/offset). Untouched columns are bit-identical to the input.
std::pair<Matrix, Matrix> corrupt(const Matrix& X, const Matrix& C, const CorruptionSpec& spec,
                                  Rng& rng);

// Same transform on caller-chosen columns; lets tests nest column subsets.
std::pair<Matrix, Matrix> corrupt_columns(const Matrix& X, const Matrix& C,
                                          const std::vector<std::size_t>& x_cols,
                                          const std::vector<std::size_t>& c_cols,
                                          const CorruptionSpec& spec, Rng& rng);

// Calibrate a threshold on the clean test scores at target_rate, draw one
// shared sample of spec.n_rows normal rows, then corrupt / score / count
// per spec with the deterministic reconstruction-error score.
std::vector<RobustnessRow> run_protocol(const JlvaeParams& params, const ModelConfig& config,
                                        const PreparedDataset& test_set,
                                        const std::vector<CorruptionSpec>& specs,
                                        double target_rate, std::uint64_t protocol_seed);

std::string robustness_table_csv(const std::vector<RobustnessRow>& rows);

}  // namespace jlvae
