#include "jlvae/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "jlvae/csv.hpp"
#include "jlvae/error.hpp"
#include "jlvae/rng.hpp"

namespace jlvae {

using nlohmann::json;

void PreparedDataset::validate() const {
    if (C.rows() != X.rows()) {
        throw ShapeError("dataset: X " + X.shape_str() + " and C " + C.shape_str() +
                         " row counts differ");
    }
    if (labels && labels->size() != X.rows()) {
        throw ShapeError("dataset: label count " + std::to_string(labels->size()) +
                         " does not match " + std::to_string(X.rows()) + " rows");
    }
    if (row_ids.size() != X.rows()) {
        throw ShapeError("dataset: row_id count " + std::to_string(row_ids.size()) +
                         " does not match " + std::to_string(X.rows()) + " rows");
    }
}

PreparedDataset PreparedDataset::subset(std::span<const std::size_t> indices) const {
    PreparedDataset out;
    out.X = gather_rows(X, indices);
    out.C = gather_rows(C, indices);
    if (labels) {
        std::vector<std::uint8_t> l(indices.size());
        for (std::size_t i = 0; i < indices.size(); ++i) l[i] = (*labels)[indices[i]];
        out.labels = std::move(l);
    }
    out.row_ids.reserve(indices.size());
    for (auto i : indices) out.row_ids.push_back(row_ids.at(i));
    return out;
}

std::size_t PreparedDataset::anomaly_count() const {
    if (!labels) return 0;
    return static_cast<std::size_t>(std::count(labels->begin(), labels->end(), std::uint8_t{1}));
}

namespace {

std::vector<std::size_t> shuffled_indices(std::vector<std::size_t> idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = rng.uniform_index(i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

}  // namespace

std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<std::uint8_t>& labels,
                                                       std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ValueError("stratified_kfold: k must be >= 2");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
    if (pos.size() < k || neg.size() < k) {
        throw ValueError("stratified_kfold: a class has fewer than k=" + std::to_string(k) +
                         " members (" + std::to_string(pos.size()) + " positive, " +
                         std::to_string(neg.size()) + " negative)");
    }

    Rng root(seed);
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t cls = 0;
    for (auto* group : {&neg, &pos}) {
        Rng r = root.child(cls++);
        auto order = shuffled_indices(*group, r);
        for (std::size_t i = 0; i < order.size(); ++i) folds[i % k].push_back(order[i]);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

std::vector<std::size_t> fold_complement(const std::vector<std::vector<std::size_t>>& folds,
                                         std::size_t test_fold) {
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        if (f == test_fold) continue;
        out.insert(out.end(), folds[f].begin(), folds[f].end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> stratified_subsample(const std::vector<std::uint8_t>& labels,
                                              std::size_t target_n, std::uint64_t seed) {
    if (target_n > labels.size()) {
        throw ValueError("stratified_subsample: target " + std::to_string(target_n) +
                         " exceeds population " + std::to_string(labels.size()));
    }
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);

    const double frac = static_cast<double>(target_n) / static_cast<double>(labels.size());
    std::size_t take_pos = static_cast<std::size_t>(
        std::llround(frac * static_cast<double>(pos.size())));
    take_pos = std::min(take_pos, pos.size());
    std::size_t take_neg = target_n - std::min(target_n, take_pos);
    if (take_neg > neg.size()) {  // shift the shortfall back to positives
        take_pos += take_neg - neg.size();
        take_neg = neg.size();
        take_pos = std::min(take_pos, pos.size());
    }

    Rng root(seed);
    Rng rn = root.child(0), rp = root.child(1);
    auto pick_neg = shuffled_indices(neg, rn);
    auto pick_pos = shuffled_indices(pos, rp);
    std::vector<std::size_t> out(pick_neg.begin(), pick_neg.begin() + take_neg);
    out.insert(out.end(), pick_pos.begin(), pick_pos.begin() + take_pos);
    std::sort(out.begin(), out.end());
    return out;
}

std::pair<PreparedDataset, PreparedDataset> split_train_val(const PreparedDataset& data,
                                                            double val_fraction,
                                                            std::uint64_t seed) {
    if (val_fraction < 0.0 || val_fraction >= 1.0) {
        throw ValueError("split_train_val: val_fraction must be in [0, 1)");
    }
    std::vector<std::size_t> idx(data.rows());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    idx = shuffled_indices(std::move(idx), rng);
    const std::size_t n_val = static_cast<std::size_t>(
        std::llround(val_fraction * static_cast<double>(data.rows())));
    std::vector<std::size_t> val_idx(idx.begin(), idx.begin() + n_val);
    std::vector<std::size_t> train_idx(idx.begin() + n_val, idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    return {data.subset(train_idx), data.subset(val_idx)};
}

void save_dataset(const PreparedDataset& data, const std::string& dir, const std::string& kind,
                  const std::string& extra_manifest_json) {
    namespace fs = std::filesystem;
    data.validate();
    fs::create_directories(dir);

    {
        std::ostringstream ss;
        write_matrix_csv(ss, data.X);
        write_file_atomic(dir + "/X.csv", ss.str());
    }
    {
        std::ostringstream ss;
        write_matrix_csv(ss, data.C);
        write_file_atomic(dir + "/C.csv", ss.str());
    }
    {
        std::ostringstream ss;
        for (std::size_t i = 0; i < data.rows(); ++i) {
            const int lab = data.labels ? static_cast<int>((*data.labels)[i]) : -1;
            ss << data.row_ids[i] << ',' << lab << '\n';
        }
        write_file_atomic(dir + "/labels.csv", ss.str());
    }

    json manifest;
    manifest["format_version"] = 1;
    manifest["kind"] = kind;
    manifest["rows"] = data.rows();
    manifest["dim_x"] = data.dim_x();
    manifest["dim_c"] = data.dim_c();
    manifest["has_labels"] = data.labels.has_value();
    manifest["anomaly_count"] = data.anomaly_count();
    manifest["fingerprint"] = dataset_fingerprint(data);
    if (!extra_manifest_json.empty()) {
        manifest["details"] = json::parse(extra_manifest_json);
    }
    write_file_atomic(dir + "/manifest.json", manifest.dump(2) + "\n");
}

PreparedDataset load_dataset(const std::string& dir) {
    PreparedDataset out;
    {
        std::istringstream in(read_file(dir + "/X.csv"));
        out.X = read_matrix_csv(in);
    }
    {
        std::istringstream in(read_file(dir + "/C.csv"));
        out.C = read_matrix_csv(in);
    }
    {
        std::istringstream in(read_file(dir + "/labels.csv"));
        std::vector<std::uint8_t> labels;
        bool any_labeled = false;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto fields = split_csv_line(line);
            if (fields.size() != 2) throw IoError("labels.csv: expected 'row_id,label'");
            out.row_ids.push_back(std::stoull(fields[0]));
            const int lab = std::stoi(fields[1]);
            labels.push_back(lab == 1 ? 1 : 0);
            if (lab >= 0) any_labeled = true;
        }
        if (any_labeled) out.labels = std::move(labels);
    }
    out.validate();
    return out;
}

std::string dataset_fingerprint(const PreparedDataset& data) {
    std::string blob;
    auto feed = [&blob](const void* bytes, std::size_t len) {
        blob.append(static_cast<const char*>(bytes), len);
    };
    const std::size_t nx = data.X.size(), nc = data.C.size();
    feed(&nx, sizeof nx);
    feed(&nc, sizeof nc);
    if (nx) feed(data.X.data().data(), nx * sizeof(double));
    if (nc) feed(data.C.data().data(), nc * sizeof(double));
    if (data.labels) feed(data.labels->data(), data.labels->size());
    return fnv1a_hex(blob);
}

}  // namespace jlvae
