#pragma once

#include <cstddef>
#include <vector>

#include "jlvae/matrix.hpp"

namespace jlvae {

struct LofConfig {
    std::size_t k = 20;
};

// Brute-force Local Outlier Factor with Euclidean distances. Neighborhoods
// include every point within the k-distance (ties kept). Points inside
// exact-duplicate clusters larger than k get LOF 1.
std::vector<double> lof_score(const Matrix& data, const LofConfig& config);

}  // namespace jlvae
