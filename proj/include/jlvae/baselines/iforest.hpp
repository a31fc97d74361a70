#pragma once

#include <cstdint>
#include <vector>

#include "jlvae/matrix.hpp"

namespace jlvae {

// Random axis-aligned isolation trees over seeded subsamples; anomaly score
// 2^(-E[path]/c(subsample)), higher = more anomalous.
struct IsoTree {
    struct Node {
        int split_dim = -1;      // -1 marks a leaf
        double split_value = 0.0;
        int left = -1;
        int right = -1;
        int leaf_size = 0;
    };
    std::vector<Node> nodes;  // nodes[0] is the root
};

struct IsoForestModel {
    std::vector<IsoTree> trees;
    std::size_t subsample_size = 0;
    std::size_t n_trees = 0;
};

// c(m): expected unsuccessful-search path length in a BST of m points;
// c(1) = 0, c(2) = 1, otherwise 2 H(m-1) - 2 (m-1)/m with exact harmonic
// numbers for small m.
double iforest_path_adjustment(std::size_t m);

IsoForestModel iforest_fit(const Matrix& data, std::size_t n_trees, std::size_t subsample_size,
                           std::uint64_t seed);

std::vector<double> iforest_score(const IsoForestModel& model, const Matrix& data);

}  // namespace jlvae
