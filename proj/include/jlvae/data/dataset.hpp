#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jlvae/matrix.hpp"

namespace jlvae {

// Paired behavioral (X) and contextual (C) matrices plus optional anomaly
// labels; the unit every downstream stage consumes.
class PreparedDataset {
public:
    Matrix X;
    Matrix C;
    std::optional<std::vector<std::uint8_t>> labels;  // 1 = anomaly
    std::vector<std::size_t> row_ids;

    std::size_t rows() const noexcept { return X.rows(); }
    std::size_t dim_x() const noexcept { return X.cols(); }
    std::size_t dim_c() const noexcept { return C.cols(); }

    void validate() const;

    PreparedDataset subset(std::span<const std::size_t> indices) const;

    std::size_t anomaly_count() const;
};

// k disjoint index folds with per-fold class counts within one of
// proportional; both classes must have at least k members.
std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<std::uint8_t>& labels,
                                                       std::size_t k, std::uint64_t seed);

// Complement of one fold: all indices not in folds[test_fold], ascending.
std::vector<std::size_t> fold_complement(const std::vector<std::vector<std::size_t>>& folds,
                                         std::size_t test_fold);

// Class-ratio-preserving subsample of size target_n (ascending indices).
std::vector<std::size_t> stratified_subsample(const std::vector<std::uint8_t>& labels,
                                              std::size_t target_n, std::uint64_t seed);

// Seeded row split into (train, val) with round(n * val_fraction) rows in val.
std::pair<PreparedDataset, PreparedDataset> split_train_val(const PreparedDataset& data,
                                                            double val_fraction,
                                                            std::uint64_t seed);

// Directory persistence: manifest.json + X.csv + C.csv + labels.csv.
void save_dataset(const PreparedDataset& data, const std::string& dir,
                  const std::string& kind, const std::string& extra_manifest_json);
PreparedDataset load_dataset(const std::string& dir);

// FNV-1a over the manifest-relevant content; identifies a prepared dataset.
std::string dataset_fingerprint(const PreparedDataset& data);

}  // namespace jlvae
