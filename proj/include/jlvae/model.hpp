#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "jlvae/matrix.hpp"
#include "jlvae/mlp.hpp"

namespace jlvae {

enum class ReconLoss { L2Norm, SquaredL2 };

std::string recon_loss_name(ReconLoss r);
ReconLoss recon_loss_from_name(const std::string& name);

struct ModelConfig {
    std::size_t dim_x = 0;
    std::size_t dim_c = 0;
    std::size_t latent_x = 0;
    std::size_t latent_c = 0;
    std::vector<std::size_t> recognizer_x_hidden;
    std::vector<std::size_t> recognizer_c_hidden;
    std::vector<std::size_t> generator_x_hidden;
    std::vector<std::size_t> generator_c_hidden;
    double l1_lambda = 0.0;
    std::size_t mc_samples_train = 1;
    ReconLoss recon_loss = ReconLoss::L2Norm;

    void validate() const;

    // 65/45-attribute network intrusion layout: recognizers 65-58-32 and
    // 110-40-22 with 4-dim latents, mirrored generators, lambda 1e-5.
    static ModelConfig kdd99();

    // Pump-station layout: 28 behavioral / 38 contextual attributes,
    // latents 5 and 2, recognizers 28-20-10 and 66-20-10, behavioral
    // generator mirrored, contextual generator 2-4-7-10-38.
    static ModelConfig plant_synth();
};

// The four jointly-trained networks. The behavioral generator consumes
// [z_x, z_c]; that concatenation is the cross-link through which context
// modulates the behavioral reconstruction.
struct JlvaeParams {
    Mlp recognizer_x;  // dim_x -> ... -> 2*latent_x (mu block, then log-var block)
    Mlp recognizer_c;  // dim_x+dim_c -> ... -> 2*latent_c
    Mlp generator_x;   // latent_x+latent_c -> ... -> dim_x
    Mlp generator_c;   // latent_c -> ... -> dim_c

    Mlp& mlp(std::size_t i);
    const Mlp& mlp(std::size_t i) const;
};

inline constexpr std::array<const char*, 4> kMlpNames = {"recognizer_x", "recognizer_c",
                                                         "generator_x", "generator_c"};

struct JlvaeGrads {
    MlpGrads recognizer_x, recognizer_c, generator_x, generator_c;

    MlpGrads& mlp(std::size_t i);
    const MlpGrads& mlp(std::size_t i) const;
};

// Diagonal-Gaussian posterior parameters per observation. log_var is stored
// already clamped to [-kLogVarClamp, kLogVarClamp].
struct GaussianLatent {
    Matrix mu;
    Matrix log_var;
};

inline constexpr double kLogVarClamp = 10.0;

struct LossBreakdown {
    double kl_zx = 0.0;
    double kl_zc = 0.0;
    double recon_x = 0.0;
    double recon_c = 0.0;
    double l1 = 0.0;
    double total = 0.0;
};

struct LossCache {
    ModelConfig config;
    Matrix x, c;
    Matrix eps_x, eps_c;  // (N*L) x latent dim, sample blocks stacked row-wise
    MlpCache rec_x_cache, rec_c_cache;
    GaussianLatent lat_x, lat_c;
    std::vector<MlpCache> gen_x_caches, gen_c_caches;  // one per MC sample
};

// Glorot-uniform weights, zero biases; bit-deterministic for a fixed seed.
JlvaeParams init_params(const ModelConfig& config, std::uint64_t seed);

// q(z_x | x)
GaussianLatent encode_behavioral(const JlvaeParams& params, const ModelConfig& config,
                                 const Matrix& x);
// q(z_c | x, c)
GaussianLatent encode_contextual(const JlvaeParams& params, const ModelConfig& config,
                                 const Matrix& x, const Matrix& c);

// z = mu + exp(log_var / 2) .* eps
Matrix reparameterize(const GaussianLatent& latent, const Matrix& eps);

// c_hat from z_c
Matrix decode_contextual(const JlvaeParams& params, const Matrix& z_c);
// x_hat from [z_x, z_c]
Matrix decode_behavioral(const JlvaeParams& params, const Matrix& z_x, const Matrix& z_c);

// Batch mean of KL(N(mu, diag(exp(log_var))) || N(0, I)); always >= 0.
double kl_std_normal(const GaussianLatent& latent);

// Empirical minimisation objective: kl_zx + kl_zc + mean reconstruction
// costs (averaged over MC samples) + L1 penalty on weights.
std::pair<LossBreakdown, LossCache> loss_forward(const JlvaeParams& params, const Matrix& x,
                                                 const Matrix& c, const Matrix& eps_x,
                                                 const Matrix& eps_c,
                                                 const ModelConfig& config);

JlvaeGrads loss_backward(const JlvaeParams& params, const LossCache& cache);

// Convenience: evaluate the loss only, with eps = 0 (posterior means).
LossBreakdown loss_eval_deterministic(const JlvaeParams& params, const Matrix& x,
                                      const Matrix& c, const ModelConfig& config);

JlvaeGrads zeros_like(const JlvaeParams& params);
double l1_weight_sum(const JlvaeParams& params);
std::size_t param_count(const JlvaeParams& params);

// Every parameter as a pointer, in a fixed traversal order (mlp index, layer,
// weights row-major, then bias). Shared by the finite-difference oracle,
// Adam and the checkpoint writer.
std::vector<double*> param_pointers(JlvaeParams& params);
std::vector<double> flatten(const JlvaeGrads& grads);

}  // namespace jlvae
