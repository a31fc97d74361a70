#include "jlvae/baselines/lof.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "jlvae/error.hpp"

namespace jlvae {

std::vector<double> lof_score(const Matrix& data, const LofConfig& config) {
    const std::size_t n = data.rows();
    const std::size_t k = config.k;
    if (k == 0) throw ValueError("lof_score: k must be >= 1");
    if (k >= n) {
        throw ValueError("lof_score: k=" + std::to_string(k) + " must be < n=" +
                         std::to_string(n));
    }
    const std::size_t dim = data.cols();

    std::vector<double> k_dist(n, 0.0);
    std::vector<std::vector<std::size_t>> neighbors(n);
    std::vector<std::vector<double>> neighbor_dist(n);

    std::vector<double> d2(n);
    std::vector<double> scratch;
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = data.row_ptr(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double* xj = data.row_ptr(j);
            double acc = 0.0;
            for (std::size_t t = 0; t < dim; ++t) {
                const double d = xi[t] - xj[t];
                acc += d * d;
            }
            d2[j] = acc;
        }
        d2[i] = std::numeric_limits<double>::infinity();  // exclude self

        scratch.assign(d2.begin(), d2.end());
        std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
        const double kd2 = scratch[k - 1];
        k_dist[i] = std::sqrt(kd2);

        auto& nb = neighbors[i];
        auto& nd = neighbor_dist[i];
        nb.clear();
        nd.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            if (d2[j] <= kd2) {
                nb.push_back(j);
                nd.push_back(std::sqrt(d2[j]));
            }
        }
    }

    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> lrd(n);
    for (std::size_t i = 0; i < n; ++i) {
        double reach_sum = 0.0;
        for (std::size_t t = 0; t < neighbors[i].size(); ++t) {
            const std::size_t o = neighbors[i][t];
            reach_sum += std::max(k_dist[o], neighbor_dist[i][t]);
        }
        lrd[i] = reach_sum > 0.0 ? static_cast<double>(neighbors[i].size()) / reach_sum : kInf;
    }

    std::vector<double> lof(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (lrd[i] == kInf) {
            // Exact-duplicate cluster: density ratio defined as 1.
            lof[i] = 1.0;
            continue;
        }
        double acc = 0.0;
        for (const std::size_t o : neighbors[i]) acc += lrd[o];
        lof[i] = acc / (static_cast<double>(neighbors[i].size()) * lrd[i]);
    }
    return lof;
}

}  // namespace jlvae
