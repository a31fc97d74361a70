#include "jlvae/model.hpp"

#include <algorithm>
#include <cmath>

#include "jlvae/error.hpp"
#include "jlvae/rng.hpp"

namespace jlvae {

std::string recon_loss_name(ReconLoss r) {
    return r == ReconLoss::L2Norm ? "l2_norm" : "squared_l2";
}

ReconLoss recon_loss_from_name(const std::string& name) {
    if (name == "l2_norm") return ReconLoss::L2Norm;
    if (name == "squared_l2") return ReconLoss::SquaredL2;
    throw ConfigError("unknown recon_loss '" + name + "'");
}

void ModelConfig::validate() const {
    if (dim_x == 0 || dim_c == 0 || latent_x == 0 || latent_c == 0) {
        throw ConfigError("model dims must all be >= 1");
    }
    for (const auto* h :
         {&recognizer_x_hidden, &recognizer_c_hidden, &generator_x_hidden, &generator_c_hidden}) {
        for (auto w : *h) {
            if (w == 0) throw ConfigError("hidden layer widths must be >= 1");
        }
    }
    if (l1_lambda < 0.0) throw ConfigError("l1_lambda must be >= 0");
    if (mc_samples_train == 0) throw ConfigError("mc_samples_train must be >= 1");
}

ModelConfig ModelConfig::kdd99() {
    ModelConfig c;
    c.dim_x = 65;
    c.dim_c = 45;
    c.latent_x = 4;
    c.latent_c = 4;
    c.recognizer_x_hidden = {58, 32};
    c.recognizer_c_hidden = {40, 22};
    c.generator_x_hidden = {32, 58};
    c.generator_c_hidden = {22, 40};
    c.l1_lambda = 1e-5;
    c.mc_samples_train = 1;
    c.recon_loss = ReconLoss::L2Norm;
    return c;
}

ModelConfig ModelConfig::plant_synth() {
    ModelConfig c;
    c.dim_x = 28;
    c.dim_c = 38;
    c.latent_x = 5;
    c.latent_c = 2;
    c.recognizer_x_hidden = {20, 10};
    c.recognizer_c_hidden = {20, 10};
    c.generator_x_hidden = {10, 20};
    c.generator_c_hidden = {4, 7, 10};
    c.l1_lambda = 1e-5;
    c.mc_samples_train = 1;
    c.recon_loss = ReconLoss::L2Norm;
    return c;
}

Mlp& JlvaeParams::mlp(std::size_t i) {
    switch (i) {
        case 0: return recognizer_x;
        case 1: return recognizer_c;
        case 2: return generator_x;
        case 3: return generator_c;
    }
    throw ValueError("mlp index out of range");
}

const Mlp& JlvaeParams::mlp(std::size_t i) const {
    return const_cast<JlvaeParams*>(this)->mlp(i);
}

MlpGrads& JlvaeGrads::mlp(std::size_t i) {
    switch (i) {
        case 0: return recognizer_x;
        case 1: return recognizer_c;
        case 2: return generator_x;
        case 3: return generator_c;
    }
    throw ValueError("mlp index out of range");
}

const MlpGrads& JlvaeGrads::mlp(std::size_t i) const {
    return const_cast<JlvaeGrads*>(this)->mlp(i);
}

namespace {

Mlp build_mlp(std::size_t input, const std::vector<std::size_t>& hidden, std::size_t output,
              Rng& rng) {
    std::vector<std::size_t> widths;
    widths.push_back(input);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(output);

    Mlp mlp;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const std::size_t fan_in = widths[i], fan_out = widths[i + 1];
        MlpLayer layer;
        layer.weights = Matrix(fan_in, fan_out);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& w : layer.weights.data()) w = rng.uniform(-bound, bound);
        layer.bias.assign(fan_out, 0.0);
        const bool last = (i + 2 == widths.size());
        layer.activation = last ? Activation::Linear : Activation::Relu;
        mlp.layers.push_back(std::move(layer));
    }
    mlp.validate();
    return mlp;
}

void check_batch(const Matrix& x, std::size_t want_cols, const char* what) {
    if (x.cols() != want_cols) {
        throw ShapeError(std::string(what) + ": got " + x.shape_str() + ", expected " +
                         std::to_string(want_cols) + " columns");
    }
}

GaussianLatent split_head(const Matrix& head, std::size_t latent_dim) {
    GaussianLatent lat;
    lat.mu = slice_cols(head, 0, latent_dim);
    lat.log_var = slice_cols(head, latent_dim, 2 * latent_dim);
    for (double& v : lat.log_var.data()) v = std::clamp(v, -kLogVarClamp, kLogVarClamp);
    return lat;
}

double recon_term(const Matrix& target, const Matrix& pred, ReconLoss kind) {
    require_same_shape(target, pred, "reconstruction");
    double acc = 0.0;
    for (std::size_t i = 0; i < target.rows(); ++i) {
        double sq = 0.0;
        const double* t = target.row_ptr(i);
        const double* p = pred.row_ptr(i);
        for (std::size_t j = 0; j < target.cols(); ++j) {
            const double d = t[j] - p[j];
            sq += d * d;
        }
        acc += kind == ReconLoss::L2Norm ? std::sqrt(sq) : 0.5 * sq;
    }
    return acc / static_cast<double>(target.rows());
}

// d(recon_term)/d(pred), scaled by `scale` (1 / (L * N) including the batch
// mean already folded into recon_term).
Matrix recon_grad(const Matrix& target, const Matrix& pred, ReconLoss kind, double scale) {
    Matrix g(pred.rows(), pred.cols());
    for (std::size_t i = 0; i < target.rows(); ++i) {
        const double* t = target.row_ptr(i);
        const double* p = pred.row_ptr(i);
        double* grow = g.row_ptr(i);
        if (kind == ReconLoss::SquaredL2) {
            for (std::size_t j = 0; j < target.cols(); ++j) grow[j] = scale * (p[j] - t[j]);
        } else {
            double sq = 0.0;
            for (std::size_t j = 0; j < target.cols(); ++j) {
                const double d = t[j] - p[j];
                sq += d * d;
            }
            const double norm = std::sqrt(sq);
            if (norm == 0.0) continue;  // subgradient 0 at the kink
            for (std::size_t j = 0; j < target.cols(); ++j) {
                grow[j] = scale * (p[j] - t[j]) / norm;
            }
        }
    }
    return g;
}

void require_finite(double v, const char* term) {
    if (!std::isfinite(v)) {
        throw NonFiniteError(term, std::string("loss term '") + term + "' is not finite");
    }
}

}  // namespace

JlvaeParams init_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng root(seed);
    JlvaeParams p;
    Rng r0 = root.child(0);
    p.recognizer_x = build_mlp(config.dim_x, config.recognizer_x_hidden, 2 * config.latent_x, r0);
    Rng r1 = root.child(1);
    p.recognizer_c =
        build_mlp(config.dim_x + config.dim_c, config.recognizer_c_hidden, 2 * config.latent_c, r1);
    Rng r2 = root.child(2);
    p.generator_x =
        build_mlp(config.latent_x + config.latent_c, config.generator_x_hidden, config.dim_x, r2);
    Rng r3 = root.child(3);
    p.generator_c = build_mlp(config.latent_c, config.generator_c_hidden, config.dim_c, r3);
    return p;
}

GaussianLatent encode_behavioral(const JlvaeParams& params, const ModelConfig& config,
                                 const Matrix& x) {
    check_batch(x, config.dim_x, "encode_behavioral");
    MlpCache cache = mlp_forward(params.recognizer_x, x);
    return split_head(cache.output(), config.latent_x);
}

GaussianLatent encode_contextual(const JlvaeParams& params, const ModelConfig& config,
                                 const Matrix& x, const Matrix& c) {
    check_batch(x, config.dim_x, "encode_contextual x");
    check_batch(c, config.dim_c, "encode_contextual c");
    if (x.rows() != c.rows()) {
        throw ShapeError("encode_contextual: x " + x.shape_str() + " and c " + c.shape_str() +
                         " row counts differ");
    }
    MlpCache cache = mlp_forward(params.recognizer_c, hconcat(x, c));
    return split_head(cache.output(), config.latent_c);
}

Matrix reparameterize(const GaussianLatent& latent, const Matrix& eps) {
    require_same_shape(latent.mu, latent.log_var, "latent");
    require_same_shape(latent.mu, eps, "reparameterize eps");
    Matrix z = latent.mu;
    for (std::size_t i = 0; i < z.size(); ++i) {
        z.data()[i] += std::exp(0.5 * latent.log_var.data()[i]) * eps.data()[i];
    }
    return z;
}

Matrix decode_contextual(const JlvaeParams& params, const Matrix& z_c) {
    check_batch(z_c, params.generator_c.input_dim(), "decode_contextual");
    return mlp_forward(params.generator_c, z_c).output();
}

Matrix decode_behavioral(const JlvaeParams& params, const Matrix& z_x, const Matrix& z_c) {
    if (z_x.rows() != z_c.rows()) {
        throw ShapeError("decode_behavioral: z_x " + z_x.shape_str() + " and z_c " +
                         z_c.shape_str() + " row counts differ");
    }
    Matrix z = hconcat(z_x, z_c);
    check_batch(z, params.generator_x.input_dim(), "decode_behavioral");
    return mlp_forward(params.generator_x, z).output();
}

double kl_std_normal(const GaussianLatent& latent) {
    require_same_shape(latent.mu, latent.log_var, "kl_std_normal");
    const std::size_t n = latent.mu.rows();
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < latent.mu.size(); ++i) {
        const double mu = latent.mu.data()[i];
        const double lv = latent.log_var.data()[i];
        acc += -0.5 * (1.0 + lv - mu * mu - std::exp(lv));
    }
    // Mathematically >= 0; guard against cancellation dust near zero.
    return std::max(0.0, acc / static_cast<double>(n));
}

std::pair<LossBreakdown, LossCache> loss_forward(const JlvaeParams& params, const Matrix& x,
                                                 const Matrix& c, const Matrix& eps_x,
                                                 const Matrix& eps_c,
                                                 const ModelConfig& config) {
    check_batch(x, config.dim_x, "loss_forward x");
    check_batch(c, config.dim_c, "loss_forward c");
    if (x.rows() != c.rows()) {
        throw ShapeError("loss_forward: x " + x.shape_str() + " and c " + c.shape_str() +
                         " row counts differ");
    }
    const std::size_t n = x.rows();
    const std::size_t L = config.mc_samples_train;
    if (eps_x.rows() != n * L || eps_x.cols() != config.latent_x) {
        throw ShapeError("loss_forward: eps_x " + eps_x.shape_str() + ", expected " +
                         std::to_string(n * L) + "x" + std::to_string(config.latent_x));
    }
    if (eps_c.rows() != n * L || eps_c.cols() != config.latent_c) {
        throw ShapeError("loss_forward: eps_c " + eps_c.shape_str() + ", expected " +
                         std::to_string(n * L) + "x" + std::to_string(config.latent_c));
    }

    LossCache cache;
    cache.config = config;
    cache.x = x;
    cache.c = c;
    cache.eps_x = eps_x;
    cache.eps_c = eps_c;

    cache.rec_x_cache = mlp_forward(params.recognizer_x, x);
    cache.lat_x = split_head(cache.rec_x_cache.output(), config.latent_x);
    cache.rec_c_cache = mlp_forward(params.recognizer_c, hconcat(x, c));
    cache.lat_c = split_head(cache.rec_c_cache.output(), config.latent_c);

    LossBreakdown loss;
    loss.kl_zx = kl_std_normal(cache.lat_x);
    loss.kl_zc = kl_std_normal(cache.lat_c);

    for (std::size_t l = 0; l < L; ++l) {
        std::vector<std::size_t> rows(n);
        for (std::size_t i = 0; i < n; ++i) rows[i] = l * n + i;
        const Matrix eps_x_l = gather_rows(eps_x, rows);
        const Matrix eps_c_l = gather_rows(eps_c, rows);
        const Matrix z_x = reparameterize(cache.lat_x, eps_x_l);
        const Matrix z_c = reparameterize(cache.lat_c, eps_c_l);
        cache.gen_c_caches.push_back(mlp_forward(params.generator_c, z_c));
        cache.gen_x_caches.push_back(mlp_forward(params.generator_x, hconcat(z_x, z_c)));
        loss.recon_c += recon_term(c, cache.gen_c_caches.back().output(), config.recon_loss);
        loss.recon_x += recon_term(x, cache.gen_x_caches.back().output(), config.recon_loss);
    }
    loss.recon_x /= static_cast<double>(L);
    loss.recon_c /= static_cast<double>(L);
    loss.l1 = config.l1_lambda == 0.0 ? 0.0 : config.l1_lambda * l1_weight_sum(params);

    require_finite(loss.kl_zx, "kl_zx");
    require_finite(loss.kl_zc, "kl_zc");
    require_finite(loss.recon_x, "recon_x");
    require_finite(loss.recon_c, "recon_c");
    require_finite(loss.l1, "l1");
    loss.total = loss.kl_zx + loss.kl_zc + loss.recon_x + loss.recon_c + loss.l1;
    require_finite(loss.total, "total");
    return {loss, std::move(cache)};
}

JlvaeGrads loss_backward(const JlvaeParams& params, const LossCache& cache) {
    const ModelConfig& config = cache.config;
    const std::size_t n = cache.x.rows();
    const std::size_t L = config.mc_samples_train;
    if (cache.gen_x_caches.size() != L || cache.gen_c_caches.size() != L) {
        throw ShapeError("loss_backward: cache does not match config.mc_samples_train");
    }

    JlvaeGrads grads = zeros_like(params);
    const double inv_n = 1.0 / static_cast<double>(n);
    const double sample_scale = inv_n / static_cast<double>(L);

    // KL path: d/dmu = mu/n, d/dlog_var = (exp(log_var) - 1) / (2n)
    Matrix dmu_x(n, config.latent_x), dlv_x(n, config.latent_x);
    Matrix dmu_c(n, config.latent_c), dlv_c(n, config.latent_c);
    auto add_kl = [inv_n](const GaussianLatent& lat, Matrix& dmu, Matrix& dlv) {
        for (std::size_t i = 0; i < lat.mu.size(); ++i) {
            dmu.data()[i] = lat.mu.data()[i] * inv_n;
            dlv.data()[i] = (std::exp(lat.log_var.data()[i]) - 1.0) * 0.5 * inv_n;
        }
    };
    add_kl(cache.lat_x, dmu_x, dlv_x);
    add_kl(cache.lat_c, dmu_c, dlv_c);

    for (std::size_t l = 0; l < L; ++l) {
        const Matrix& x_hat = cache.gen_x_caches[l].output();
        const Matrix& c_hat = cache.gen_c_caches[l].output();
        const Matrix dx_hat = recon_grad(cache.x, x_hat, config.recon_loss, sample_scale);
        const Matrix dc_hat = recon_grad(cache.c, c_hat, config.recon_loss, sample_scale);

        Matrix dz_joint =
            mlp_backward(params.generator_x, cache.gen_x_caches[l], dx_hat, grads.generator_x);
        Matrix dz_c =
            mlp_backward(params.generator_c, cache.gen_c_caches[l], dc_hat, grads.generator_c);

        // reparameterization: z = mu + exp(log_var/2) .* eps
        for (std::size_t i = 0; i < n; ++i) {
            const double* djr = dz_joint.row_ptr(i);
            const double* dcr = dz_c.row_ptr(i);
            const double* ex = cache.eps_x.row_ptr(l * n + i);
            const double* ec = cache.eps_c.row_ptr(l * n + i);
            for (std::size_t j = 0; j < config.latent_x; ++j) {
                const double dz = djr[j];
                dmu_x(i, j) += dz;
                dlv_x(i, j) += dz * 0.5 * std::exp(0.5 * cache.lat_x.log_var(i, j)) * ex[j];
            }
            for (std::size_t j = 0; j < config.latent_c; ++j) {
                const double dz = djr[config.latent_x + j] + dcr[j];
                dmu_c(i, j) += dz;
                dlv_c(i, j) += dz * 0.5 * std::exp(0.5 * cache.lat_c.log_var(i, j)) * ec[j];
            }
        }
    }

    // Head gradient: [dmu | dlog_var], zeroing log-var columns where the
    // clamp was active (raw head value outside [-clamp, clamp]).
    auto head_grad = [](const MlpCache& rec_cache, const Matrix& dmu, const Matrix& dlv,
                        std::size_t k) {
        const Matrix& raw = rec_cache.output();
        Matrix g(dmu.rows(), 2 * k);
        for (std::size_t i = 0; i < dmu.rows(); ++i) {
            double* grow = g.row_ptr(i);
            const double* rawrow = raw.row_ptr(i);
            for (std::size_t j = 0; j < k; ++j) {
                grow[j] = dmu(i, j);
                const bool pass = std::abs(rawrow[k + j]) <= kLogVarClamp;
                grow[k + j] = pass ? dlv(i, j) : 0.0;
            }
        }
        return g;
    };
    mlp_backward(params.recognizer_x, cache.rec_x_cache,
                 head_grad(cache.rec_x_cache, dmu_x, dlv_x, config.latent_x), grads.recognizer_x);
    mlp_backward(params.recognizer_c, cache.rec_c_cache,
                 head_grad(cache.rec_c_cache, dmu_c, dlv_c, config.latent_c), grads.recognizer_c);

    if (config.l1_lambda > 0.0) {
        for (std::size_t mi = 0; mi < 4; ++mi) {
            const Mlp& mlp = params.mlp(mi);
            MlpGrads& g = grads.mlp(mi);
            for (std::size_t li = 0; li < mlp.layers.size(); ++li) {
                auto w = mlp.layers[li].weights.data();
                auto gw = g.layers[li].weights.data();
                for (std::size_t i = 0; i < w.size(); ++i) {
                    if (w[i] > 0.0)
                        gw[i] += config.l1_lambda;
                    else if (w[i] < 0.0)
                        gw[i] -= config.l1_lambda;
                }
            }
        }
    }
    return grads;
}

LossBreakdown loss_eval_deterministic(const JlvaeParams& params, const Matrix& x, const Matrix& c,
                                      const ModelConfig& config) {
    const Matrix eps_x(x.rows() * config.mc_samples_train, config.latent_x);
    const Matrix eps_c(x.rows() * config.mc_samples_train, config.latent_c);
    return loss_forward(params, x, c, eps_x, eps_c, config).first;
}

JlvaeGrads zeros_like(const JlvaeParams& params) {
    JlvaeGrads g;
    g.recognizer_x = zeros_like(params.recognizer_x);
    g.recognizer_c = zeros_like(params.recognizer_c);
    g.generator_x = zeros_like(params.generator_x);
    g.generator_c = zeros_like(params.generator_c);
    return g;
}

double l1_weight_sum(const JlvaeParams& params) {
    double acc = 0.0;
    for (std::size_t mi = 0; mi < 4; ++mi) {
        for (const auto& layer : params.mlp(mi).layers) {
            for (double w : layer.weights.data()) acc += std::abs(w);
        }
    }
    return acc;
}

std::size_t param_count(const JlvaeParams& params) {
    std::size_t n = 0;
    for (std::size_t mi = 0; mi < 4; ++mi) {
        for (const auto& layer : params.mlp(mi).layers) {
            n += layer.weights.size() + layer.bias.size();
        }
    }
    return n;
}

std::vector<double*> param_pointers(JlvaeParams& params) {
    std::vector<double*> out;
    out.reserve(param_count(params));
    for (std::size_t mi = 0; mi < 4; ++mi) {
        for (auto& layer : params.mlp(mi).layers) {
            for (double& w : layer.weights.data()) out.push_back(&w);
            for (double& b : layer.bias) out.push_back(&b);
        }
    }
    return out;
}

std::vector<double> flatten(const JlvaeGrads& grads) {
    std::vector<double> out;
    for (std::size_t mi = 0; mi < 4; ++mi) {
        for (const auto& layer : grads.mlp(mi).layers) {
            out.insert(out.end(), layer.weights.data().begin(), layer.weights.data().end());
            out.insert(out.end(), layer.bias.begin(), layer.bias.end());
        }
    }
    return out;
}

}  // namespace jlvae
