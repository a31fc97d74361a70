#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "jlvae/data/dataset.hpp"

namespace jlvae {

// The 41-feature connection-record schema. Columns are addressed by their
// position; categorical columns (protocol_type, service, flag) are stored
// apart from the numeric ones inside RawRecord.
namespace kdd {

constexpr std::size_t kFieldCount = 41;

const std::vector<std::string>& column_names();
bool is_categorical(std::size_t column);
// Position of a column within RawRecord::numeric or RawRecord::categorical.
std::size_t storage_index(std::size_t column);
std::size_t column_index(const std::string& name);

}  // namespace kdd

struct RawRecord {
    std::vector<double> numeric;          // numeric columns, schema order
    std::vector<std::string> categorical;  // categorical columns, schema order
    std::string label;                     // verbatim, trailing dot included
    std::size_t line_no = 0;
};

struct KddParseResult {
    std::vector<RawRecord> records;
    struct BadLine {
        std::size_t line_no;
        std::string message;
    };
    std::vector<BadLine> errors;
};

KddParseResult parse_kdd_csv(const std::string& path);
KddParseResult parse_kdd_stream(std::istream& in);

struct LabelFilterResult {
    std::vector<RawRecord> records;
    std::vector<std::uint8_t> anomaly;               // parallel to records
    std::map<std::string, std::size_t> retained;     // counts by label (dot stripped)
    std::map<std::string, std::size_t> dropped;
    std::size_t normal_count = 0;
    std::size_t anomaly_count = 0;
};

// Keeps normal plus the r2l/u2r families and ipsweep/nmap; everything else
// is dropped (counted per label). Retained attacks are anomalies.
LabelFilterResult filter_labels(std::vector<RawRecord> records);

const std::vector<std::string>& retained_attack_labels();

enum class TransformKind { MinMax, Log1pThenMinMax, OneHot };

std::string transform_kind_name(TransformKind k);
TransformKind transform_kind_from_name(const std::string& name);

struct ColumnTransform {
    std::string column;
    std::size_t column_index = 0;
    TransformKind kind = TransformKind::MinMax;
    double min = 0.0;
    double max = 0.0;
    std::vector<std::string> categories;  // OneHot only; sorted, deduplicated

    std::size_t width() const {
        return kind == TransformKind::OneHot ? categories.size() : 1;
    }
};

struct PreprocessSpec {
    std::vector<ColumnTransform> behavioral;  // service one-hot, then duration/src_bytes/dst_bytes
    std::vector<ColumnTransform> contextual;  // remaining columns, schema order

    std::size_t behavioral_width() const;
    std::size_t contextual_width() const;

    std::string to_json() const;
    static PreprocessSpec from_json(const std::string& text);
    std::string fingerprint() const;
};

// Statistics (min/max after any log1p, category dictionaries) from the given
// records only.
PreprocessSpec fit_preprocess(std::span<const RawRecord> records);

// [0,1] matrices per the fitted spec; out-of-range values clip, unseen
// categories one-hot to all zeros. Optional anomaly flags are copied into
// the dataset labels; row ids come from source line numbers.
PreparedDataset apply_preprocess(const PreprocessSpec& spec, std::span<const RawRecord> records,
                                 const std::vector<std::uint8_t>* anomaly = nullptr);

}  // namespace jlvae
