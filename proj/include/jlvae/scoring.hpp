#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jlvae/model.hpp"

namespace jlvae {

enum class ScoreMethod { ReconErrorNorm, ReconProbability };

std::string score_method_name(ScoreMethod m);
ScoreMethod score_method_from_name(const std::string& name);

// Per-observation normality scores, oriented higher = more anomalous.
struct ScoreReport {
    std::vector<double> scores;
    ScoreMethod method = ScoreMethod::ReconErrorNorm;
    std::optional<double> threshold;
    std::optional<std::vector<std::uint8_t>> flags;  // flags[i] = scores[i] > threshold
};

// ||x_i - x_hat_i|| with both latents at their posterior means; deterministic.
std::vector<double> recon_error_score(const JlvaeParams& params, const ModelConfig& config,
                                      const Matrix& x, const Matrix& c);

// Negated Monte Carlo estimate of E_q[log p(x | z)] under a unit-variance
// Gaussian likelihood around x_hat. Per-row RNG streams derived from
// (seed, row id), so results are independent of evaluation order.
std::vector<double> recon_probability_score(const JlvaeParams& params, const ModelConfig& config,
                                            const Matrix& x, const Matrix& c, std::size_t L,
                                            std::uint64_t seed);

// The ceil(N * target_rate)-th largest score; classify() with it flags at
// most that many observations (fewer when ties sit on the threshold).
double calibrate_threshold(const std::vector<double>& scores, double target_rate);

std::vector<std::uint8_t> classify(const std::vector<double>& scores, double threshold);

}  // namespace jlvae
