#include "jlvae/baselines/iforest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jlvae/error.hpp"
#include "jlvae/rng.hpp"

namespace jlvae {

namespace {

constexpr double kEulerMascheroni = 0.57721566490153286060651209008240;

double harmonic(std::size_t n) {
    if (n == 0) return 0.0;
    if (n <= 4096) {
        double h = 0.0;
        for (std::size_t i = 1; i <= n; ++i) h += 1.0 / static_cast<double>(i);
        return h;
    }
    const double x = static_cast<double>(n);
    return std::log(x) + kEulerMascheroni + 0.5 / x;
}

struct TreeBuilder {
    const Matrix& data;
    IsoTree& tree;
    std::size_t height_limit;
    Rng& rng;

    int build(std::vector<std::size_t>& rows, std::size_t lo, std::size_t hi, std::size_t depth) {
        const std::size_t size = hi - lo;
        if (size <= 1 || depth >= height_limit) return make_leaf(size);

        // Dimensions that still vary within this node.
        std::vector<std::size_t> candidates;
        for (std::size_t d = 0; d < data.cols(); ++d) {
            const double first = data(rows[lo], d);
            for (std::size_t i = lo + 1; i < hi; ++i) {
                if (data(rows[i], d) != first) {
                    candidates.push_back(d);
                    break;
                }
            }
        }
        if (candidates.empty()) return make_leaf(size);

        const std::size_t dim = candidates[rng.uniform_index(candidates.size())];
        double mn = data(rows[lo], dim), mx = mn;
        for (std::size_t i = lo + 1; i < hi; ++i) {
            mn = std::min(mn, data(rows[i], dim));
            mx = std::max(mx, data(rows[i], dim));
        }
        const double split = rng.uniform(mn, mx);

        auto mid_it = std::partition(rows.begin() + lo, rows.begin() + hi,
                                     [&](std::size_t r) { return data(r, dim) < split; });
        const std::size_t mid = static_cast<std::size_t>(mid_it - rows.begin());
        if (mid == lo || mid == hi) return make_leaf(size);

        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[node_id].split_dim = static_cast<int>(dim);
        tree.nodes[node_id].split_value = split;
        const int left = build(rows, lo, mid, depth + 1);
        const int right = build(rows, mid, hi, depth + 1);
        tree.nodes[node_id].left = left;
        tree.nodes[node_id].right = right;
        return node_id;
    }

    int make_leaf(std::size_t size) {
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[node_id].leaf_size = static_cast<int>(size);
        return node_id;
    }
};

double path_length(const IsoTree& tree, const Matrix& data, std::size_t row) {
    int node = 0;
    double depth = 0.0;
    while (tree.nodes[node].split_dim >= 0) {
        const auto& nd = tree.nodes[node];
        node = data(row, static_cast<std::size_t>(nd.split_dim)) < nd.split_value ? nd.left
                                                                                  : nd.right;
        depth += 1.0;
    }
    return depth + iforest_path_adjustment(
                       static_cast<std::size_t>(tree.nodes[node].leaf_size));
}

}  // namespace

double iforest_path_adjustment(std::size_t m) {
    if (m <= 1) return 0.0;
    if (m == 2) return 1.0;
    const double md = static_cast<double>(m);
    return 2.0 * harmonic(m - 1) - 2.0 * (md - 1.0) / md;
}

IsoForestModel iforest_fit(const Matrix& data, std::size_t n_trees, std::size_t subsample_size,
                           std::uint64_t seed) {
    if (n_trees == 0) throw ValueError("iforest_fit: need at least one tree");
    if (subsample_size < 2) throw ValueError("iforest_fit: subsample_size must be >= 2");
    if (subsample_size > data.rows()) {
        throw ValueError("iforest_fit: subsample_size " + std::to_string(subsample_size) +
                         " exceeds data rows " + std::to_string(data.rows()));
    }

    IsoForestModel model;
    model.n_trees = n_trees;
    model.subsample_size = subsample_size;
    model.trees.resize(n_trees);
    const std::size_t height_limit = static_cast<std::size_t>(
        std::ceil(std::log2(static_cast<double>(subsample_size))));
    Rng root(seed);

    std::vector<std::size_t> all(data.rows());
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t t = 0; t < n_trees; ++t) {
        Rng rng = root.child(t);
        // Partial Fisher-Yates: first subsample_size entries form the sample.
        std::vector<std::size_t> rows = all;
        for (std::size_t i = 0; i < subsample_size; ++i) {
            const std::size_t j = i + rng.uniform_index(rows.size() - i);
            std::swap(rows[i], rows[j]);
        }
        rows.resize(subsample_size);
        TreeBuilder builder{data, model.trees[t], height_limit, rng};
        builder.build(rows, 0, rows.size(), 0);
    }
    return model;
}

std::vector<double> iforest_score(const IsoForestModel& model, const Matrix& data) {
    if (model.trees.empty()) throw ValueError("iforest_score: model has no trees");
    const double norm = iforest_path_adjustment(model.subsample_size);
    std::vector<double> scores(data.rows());
    for (std::size_t i = 0; i < data.rows(); ++i) {
        double acc = 0.0;
        for (const auto& tree : model.trees) acc += path_length(tree, data, i);
        const double mean_path = acc / static_cast<double>(model.trees.size());
        scores[i] = std::pow(2.0, -mean_path / norm);
    }
    return scores;
}

}  // namespace jlvae
