#include "jlvae/data/kdd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "jlvae/csv.hpp"
#include "jlvae/error.hpp"

namespace jlvae {

using nlohmann::json;

namespace kdd {

namespace {

const std::vector<std::string> kColumns = {
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes", "land",
    "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in", "num_compromised",
    "root_shell", "su_attempted", "num_root", "num_file_creations", "num_shells",
    "num_access_files", "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate",
    "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
    "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
    "dst_host_srv_serror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate"};

// protocol_type, service, flag
constexpr std::size_t kCategoricalColumns[] = {1, 2, 3};

}  // namespace

const std::vector<std::string>& column_names() { return kColumns; }

bool is_categorical(std::size_t column) {
    return column == 1 || column == 2 || column == 3;
}

std::size_t storage_index(std::size_t column) {
    if (is_categorical(column)) {
        std::size_t idx = 0;
        for (auto c : kCategoricalColumns) {
            if (c == column) return idx;
            ++idx;
        }
    }
    std::size_t idx = 0;
    for (std::size_t c = 0; c < column; ++c) {
        if (!is_categorical(c)) ++idx;
    }
    return idx;
}

std::size_t column_index(const std::string& name) {
    for (std::size_t i = 0; i < kColumns.size(); ++i) {
        if (kColumns[i] == name) return i;
    }
    throw ConfigError("unknown kdd column '" + name + "'");
}

}  // namespace kdd

KddParseResult parse_kdd_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return parse_kdd_stream(in);
}

KddParseResult parse_kdd_stream(std::istream& in) {
    KddParseResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        RawRecord rec;
        rec.line_no = line_no;
        std::size_t field = 0;
        std::size_t start = 0;
        bool bad = false;
        while (!bad) {
            const std::size_t pos = line.find(',', start);
            const std::string value =
                pos == std::string::npos ? line.substr(start) : line.substr(start, pos - start);
            if (field < kdd::kFieldCount) {
                if (kdd::is_categorical(field)) {
                    rec.categorical.push_back(value);
                } else {
                    char* endp = nullptr;
                    const double v = std::strtod(value.c_str(), &endp);
                    if (endp == value.c_str() || *endp != '\0' || !std::isfinite(v)) {
                        result.errors.push_back(
                            {line_no, "field " + std::to_string(field + 1) + " ('" +
                                          kdd::column_names()[field] + "'): bad numeric value '" +
                                          value + "'"});
                        bad = true;
                        break;
                    }
                    rec.numeric.push_back(v);
                }
            } else if (field == kdd::kFieldCount) {
                rec.label = value;
            }
            ++field;
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        if (bad) continue;
        if (field != kdd::kFieldCount + 1) {
            result.errors.push_back({line_no, "expected 42 fields, got " + std::to_string(field)});
            continue;
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

const std::vector<std::string>& retained_attack_labels() {
    static const std::vector<std::string> kRetained = {
        // r2l family
        "ftp_write", "guess_passwd", "imap", "multihop", "phf", "spy", "warezclient",
        "warezmaster",
        // u2r family
        "buffer_overflow", "loadmodule", "perl", "rootkit",
        // retained probes
        "ipsweep", "nmap"};
    return kRetained;
}

namespace {

std::string strip_dot(const std::string& label) {
    if (!label.empty() && label.back() == '.') return label.substr(0, label.size() - 1);
    return label;
}

}  // namespace

LabelFilterResult filter_labels(std::vector<RawRecord> records) {
    const auto& retained = retained_attack_labels();
    const std::set<std::string> attack_set(retained.begin(), retained.end());

    LabelFilterResult out;
    for (auto& rec : records) {
        const std::string label = strip_dot(rec.label);
        if (label == "normal") {
            out.retained[label]++;
            out.normal_count++;
            out.records.push_back(std::move(rec));
            out.anomaly.push_back(0);
        } else if (attack_set.count(label)) {
            out.retained[label]++;
            out.anomaly_count++;
            out.records.push_back(std::move(rec));
            out.anomaly.push_back(1);
        } else {
            out.dropped[label]++;
        }
    }
    return out;
}

std::size_t PreprocessSpec::behavioral_width() const {
    std::size_t w = 0;
    for (const auto& t : behavioral) w += t.width();
    return w;
}

std::size_t PreprocessSpec::contextual_width() const {
    std::size_t w = 0;
    for (const auto& t : contextual) w += t.width();
    return w;
}

namespace {

json transform_to_json(const ColumnTransform& t) {
    json j;
    j["column"] = t.column;
    j["column_index"] = t.column_index;
    j["kind"] = transform_kind_name(t.kind);
    if (t.kind == TransformKind::OneHot) {
        j["categories"] = t.categories;
    } else {
        j["min"] = t.min;
        j["max"] = t.max;
    }
    return j;
}

ColumnTransform transform_from_json(const json& j) {
    ColumnTransform t;
    t.column = j.at("column").get<std::string>();
    t.column_index = j.at("column_index").get<std::size_t>();
    t.kind = transform_kind_from_name(j.at("kind").get<std::string>());
    if (t.kind == TransformKind::OneHot) {
        t.categories = j.at("categories").get<std::vector<std::string>>();
    } else {
        t.min = j.at("min").get<double>();
        t.max = j.at("max").get<double>();
    }
    return t;
}

}  // namespace

std::string transform_kind_name(TransformKind k) {
    switch (k) {
        case TransformKind::MinMax: return "min_max";
        case TransformKind::Log1pThenMinMax: return "log1p_min_max";
        case TransformKind::OneHot: return "one_hot";
    }
    throw ValueError("bad transform kind");
}

TransformKind transform_kind_from_name(const std::string& name) {
    if (name == "min_max") return TransformKind::MinMax;
    if (name == "log1p_min_max") return TransformKind::Log1pThenMinMax;
    if (name == "one_hot") return TransformKind::OneHot;
    throw ConfigError("unknown transform kind '" + name + "'");
}

std::string PreprocessSpec::to_json() const {
    json j;
    j["behavioral"] = json::array();
    for (const auto& t : behavioral) j["behavioral"].push_back(transform_to_json(t));
    j["contextual"] = json::array();
    for (const auto& t : contextual) j["contextual"].push_back(transform_to_json(t));
    return j.dump();
}

PreprocessSpec PreprocessSpec::from_json(const std::string& text) {
    const json j = json::parse(text);
    PreprocessSpec spec;
    for (const auto& t : j.at("behavioral")) spec.behavioral.push_back(transform_from_json(t));
    for (const auto& t : j.at("contextual")) spec.contextual.push_back(transform_from_json(t));
    return spec;
}

std::string PreprocessSpec::fingerprint() const { return fnv1a_hex(to_json()); }

namespace {

constexpr const char* kLogColumns[] = {"duration", "src_bytes", "dst_bytes"};

bool wants_log1p(const std::string& column) {
    for (const char* c : kLogColumns) {
        if (column == c) return true;
    }
    return false;
}

ColumnTransform fit_numeric(std::span<const RawRecord> records, std::size_t column) {
    ColumnTransform t;
    t.column = kdd::column_names()[column];
    t.column_index = column;
    t.kind = wants_log1p(t.column) ? TransformKind::Log1pThenMinMax : TransformKind::MinMax;
    const std::size_t si = kdd::storage_index(column);
    bool first = true;
    for (const auto& rec : records) {
        double v = rec.numeric[si];
        if (t.kind == TransformKind::Log1pThenMinMax) v = std::log1p(v);
        if (first) {
            t.min = t.max = v;
            first = false;
        } else {
            t.min = std::min(t.min, v);
            t.max = std::max(t.max, v);
        }
    }
    return t;
}

ColumnTransform fit_categorical(std::span<const RawRecord> records, std::size_t column) {
    ColumnTransform t;
    t.column = kdd::column_names()[column];
    t.column_index = column;
    t.kind = TransformKind::OneHot;
    const std::size_t si = kdd::storage_index(column);
    std::set<std::string> cats;
    for (const auto& rec : records) cats.insert(rec.categorical[si]);
    t.categories.assign(cats.begin(), cats.end());
    return t;
}

// Writes one transformed column (or one-hot block) into dst starting at
// column offset `at`; returns the width written.
std::size_t apply_transform(const ColumnTransform& t, const RawRecord& rec, double* dst) {
    if (t.kind == TransformKind::OneHot) {
        const std::size_t si = kdd::storage_index(t.column_index);
        const auto& value = rec.categorical[si];
        for (std::size_t k = 0; k < t.categories.size(); ++k) dst[k] = 0.0;
        const auto it = std::lower_bound(t.categories.begin(), t.categories.end(), value);
        if (it != t.categories.end() && *it == value) {
            dst[static_cast<std::size_t>(it - t.categories.begin())] = 1.0;
        }
        return t.categories.size();
    }
    const std::size_t si = kdd::storage_index(t.column_index);
    double v = rec.numeric[si];
    if (t.kind == TransformKind::Log1pThenMinMax) v = std::log1p(v);
    double scaled = 0.0;
    if (t.max > t.min) {
        scaled = (v - t.min) / (t.max - t.min);
        scaled = std::clamp(scaled, 0.0, 1.0);
    }
    dst[0] = scaled;
    return 1;
}

}  // namespace

PreprocessSpec fit_preprocess(std::span<const RawRecord> records) {
    if (records.empty()) throw ValueError("fit_preprocess: no records");
    PreprocessSpec spec;

    // Behavioral block: service one-hot, then duration, src_bytes, dst_bytes.
    spec.behavioral.push_back(fit_categorical(records, kdd::column_index("service")));
    for (const char* name : kLogColumns) {
        spec.behavioral.push_back(fit_numeric(records, kdd::column_index(name)));
    }

    // Contextual block: every remaining column in schema order.
    const std::set<std::size_t> behavioral_cols = {
        kdd::column_index("service"), kdd::column_index("duration"),
        kdd::column_index("src_bytes"), kdd::column_index("dst_bytes")};
    for (std::size_t col = 0; col < kdd::kFieldCount; ++col) {
        if (behavioral_cols.count(col)) continue;
        if (kdd::is_categorical(col)) {
            spec.contextual.push_back(fit_categorical(records, col));
        } else {
            spec.contextual.push_back(fit_numeric(records, col));
        }
    }
    return spec;
}

PreparedDataset apply_preprocess(const PreprocessSpec& spec, std::span<const RawRecord> records,
                                 const std::vector<std::uint8_t>* anomaly) {
    if (anomaly && anomaly->size() != records.size()) {
        throw ShapeError("apply_preprocess: anomaly flag count does not match records");
    }
    PreparedDataset out;
    const std::size_t wx = spec.behavioral_width();
    const std::size_t wc = spec.contextual_width();
    out.X = Matrix(records.size(), wx);
    out.C = Matrix(records.size(), wc);
    for (std::size_t i = 0; i < records.size(); ++i) {
        double* xrow = out.X.row_ptr(i);
        std::size_t at = 0;
        for (const auto& t : spec.behavioral) at += apply_transform(t, records[i], xrow + at);
        double* crow = out.C.row_ptr(i);
        at = 0;
        for (const auto& t : spec.contextual) at += apply_transform(t, records[i], crow + at);
        out.row_ids.push_back(records[i].line_no);
    }
    if (anomaly) out.labels = *anomaly;
    out.validate();
    return out;
}

}  // namespace jlvae
