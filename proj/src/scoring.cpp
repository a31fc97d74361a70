#include "jlvae/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jlvae/error.hpp"
#include "jlvae/rng.hpp"

namespace jlvae {

namespace {

constexpr std::size_t kScoreChunk = 4096;
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

}  // namespace

std::string score_method_name(ScoreMethod m) {
    return m == ScoreMethod::ReconErrorNorm ? "recon_error" : "recon_probability";
}

ScoreMethod score_method_from_name(const std::string& name) {
    if (name == "recon_error") return ScoreMethod::ReconErrorNorm;
    if (name == "recon_probability") return ScoreMethod::ReconProbability;
    throw ConfigError("unknown score method '" + name + "'");
}

std::vector<double> recon_error_score(const JlvaeParams& params, const ModelConfig& config,
                                      const Matrix& x, const Matrix& c) {
    if (x.rows() != c.rows()) {
        throw ShapeError("recon_error_score: x " + x.shape_str() + " and c " + c.shape_str() +
                         " row counts differ");
    }
    std::vector<double> scores(x.rows());
    for (std::size_t start = 0; start < x.rows(); start += kScoreChunk) {
        const std::size_t end = std::min(x.rows(), start + kScoreChunk);
        std::vector<std::size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const Matrix xb = gather_rows(x, idx);
        const Matrix cb = gather_rows(c, idx);
        const GaussianLatent lat_x = encode_behavioral(params, config, xb);
        const GaussianLatent lat_c = encode_contextual(params, config, xb, cb);
        const Matrix x_hat = decode_behavioral(params, lat_x.mu, lat_c.mu);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            scores[start + i] = row_l2_distance(xb, i, x_hat, i);
        }
    }
    return scores;
}

std::vector<double> recon_probability_score(const JlvaeParams& params, const ModelConfig& config,
                                            const Matrix& x, const Matrix& c, std::size_t L,
                                            std::uint64_t seed) {
    if (L == 0) throw ValueError("recon_probability_score: L must be >= 1");
    if (x.rows() != c.rows()) {
        throw ShapeError("recon_probability_score: x and c row counts differ");
    }
    const double dim = static_cast<double>(x.cols());
    std::vector<double> scores(x.rows());
    Rng root(seed);

    for (std::size_t start = 0; start < x.rows(); start += kScoreChunk) {
        const std::size_t end = std::min(x.rows(), start + kScoreChunk);
        const std::size_t n = end - start;
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), start);
        const Matrix xb = gather_rows(x, idx);
        const Matrix cb = gather_rows(c, idx);
        const GaussianLatent lat_x = encode_behavioral(params, config, xb);
        const GaussianLatent lat_c = encode_contextual(params, config, xb, cb);

        // One eps stream per row, replayed across the L samples.
        std::vector<Rng> row_rngs;
        row_rngs.reserve(n);
        for (std::size_t i = 0; i < n; ++i) row_rngs.push_back(root.child(start + i));

        std::vector<double> acc(n, 0.0);
        Matrix eps_x(n, config.latent_x), eps_c(n, config.latent_c);
        for (std::size_t l = 0; l < L; ++l) {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < config.latent_x; ++j) {
                    eps_x(i, j) = row_rngs[i].normal();
                }
                for (std::size_t j = 0; j < config.latent_c; ++j) {
                    eps_c(i, j) = row_rngs[i].normal();
                }
            }
            const Matrix z_x = reparameterize(lat_x, eps_x);
            const Matrix z_c = reparameterize(lat_c, eps_c);
            const Matrix x_hat = decode_behavioral(params, z_x, z_c);
            for (std::size_t i = 0; i < n; ++i) {
                const double d = row_l2_distance(xb, i, x_hat, i);
                // log N(x | x_hat, I) = -dim/2 log(2 pi) - ||x - x_hat||^2 / 2
                acc[i] += -0.5 * dim * kLog2Pi - 0.5 * d * d;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            scores[start + i] = -acc[i] / static_cast<double>(L);
        }
    }
    return scores;
}

double calibrate_threshold(const std::vector<double>& scores, double target_rate) {
    if (scores.empty()) throw ValueError("calibrate_threshold: empty scores");
    if (!(target_rate > 0.0 && target_rate < 1.0)) {
        throw ValueError("calibrate_threshold: target_rate must lie in (0, 1)");
    }
    const std::size_t n = scores.size();
    std::size_t m = static_cast<std::size_t>(
        std::ceil(target_rate * static_cast<double>(n)));
    m = std::clamp<std::size_t>(m, 1, n);
    std::vector<double> sorted = scores;
    std::nth_element(sorted.begin(), sorted.begin() + (m - 1), sorted.end(),
                     std::greater<double>());
    return sorted[m - 1];
}

std::vector<std::uint8_t> classify(const std::vector<double>& scores, double threshold) {
    std::vector<std::uint8_t> flags(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) flags[i] = scores[i] > threshold ? 1 : 0;
    return flags;
}

}  // namespace jlvae
