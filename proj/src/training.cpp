#include "jlvae/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "jlvae/csv.hpp"
#include "jlvae/data/dataset.hpp"
#include "jlvae/error.hpp"

namespace jlvae {

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (patience == 0) throw ConfigError("patience must be >= 1");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0 && adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
        throw ConfigError("adam betas must lie in (0, 1)");
    }
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
}

AdamState AdamState::zeros(const JlvaeParams& params) {
    AdamState s;
    s.m = zeros_like(params);
    s.v = zeros_like(params);
    return s;
}

namespace {

void adam_update_span(std::span<double> p, std::span<const double> g, std::span<double> m,
                      std::span<double> v, double lr, double b1, double b2, double eps,
                      double b1_corr, double b2_corr) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        const double m_hat = m[i] / b1_corr;
        const double v_hat = v[i] / b2_corr;
        p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

LossBreakdown scaled_add(LossBreakdown acc, const LossBreakdown& x, double w) {
    acc.kl_zx += w * x.kl_zx;
    acc.kl_zc += w * x.kl_zc;
    acc.recon_x += w * x.recon_x;
    acc.recon_c += w * x.recon_c;
    acc.l1 += w * x.l1;
    acc.total += w * x.total;
    return acc;
}

}  // namespace

void adam_step(AdamState& state, JlvaeParams& params, const JlvaeGrads& grads,
               const TrainConfig& config) {
    state.step += 1;
    const double b1_corr = 1.0 - std::pow(config.adam_beta1, static_cast<double>(state.step));
    const double b2_corr = 1.0 - std::pow(config.adam_beta2, static_cast<double>(state.step));
    for (std::size_t mi = 0; mi < 4; ++mi) {
        Mlp& mlp = params.mlp(mi);
        const MlpGrads& g = grads.mlp(mi);
        MlpGrads& m = state.m.mlp(mi);
        MlpGrads& v = state.v.mlp(mi);
        if (g.layers.size() != mlp.layers.size()) {
            throw ShapeError("adam_step: gradient layout does not match parameters");
        }
        for (std::size_t li = 0; li < mlp.layers.size(); ++li) {
            adam_update_span(mlp.layers[li].weights.data(), g.layers[li].weights.data(),
                             m.layers[li].weights.data(), v.layers[li].weights.data(),
                             config.learning_rate, config.adam_beta1, config.adam_beta2,
                             config.adam_eps, b1_corr, b2_corr);
            adam_update_span(mlp.layers[li].bias, g.layers[li].bias, m.layers[li].bias,
                             v.layers[li].bias, config.learning_rate, config.adam_beta1,
                             config.adam_beta2, config.adam_eps, b1_corr, b2_corr);
        }
    }
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   Rng& rng) {
    if (batch_size == 0) throw ValueError("make_batches: batch_size must be >= 1");
    if (n == 0) throw ValueError("make_batches: empty dataset");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.uniform_index(i);
        std::swap(order[i - 1], order[j]);
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

LossBreakdown evaluate_loss(const JlvaeParams& params, const PreparedDataset& data,
                            const ModelConfig& model_config, std::size_t batch_size) {
    if (data.rows() == 0) throw ValueError("evaluate_loss: empty dataset");
    LossBreakdown acc;
    for (std::size_t start = 0; start < data.rows(); start += batch_size) {
        const std::size_t end = std::min(data.rows(), start + batch_size);
        std::vector<std::size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const Matrix x = gather_rows(data.X, idx);
        const Matrix c = gather_rows(data.C, idx);
        const LossBreakdown part = loss_eval_deterministic(params, x, c, model_config);
        acc = scaled_add(acc, part, static_cast<double>(end - start));
    }
    const double inv = 1.0 / static_cast<double>(data.rows());
    return scaled_add(LossBreakdown{}, acc, inv);
}

TrainResult train(const PreparedDataset& train_set, const PreparedDataset& val_set,
                  const ModelConfig& model_config, const TrainConfig& train_config) {
    model_config.validate();
    train_config.validate();
    train_set.validate();
    val_set.validate();
    if (train_set.dim_x() != model_config.dim_x || train_set.dim_c() != model_config.dim_c) {
        throw ShapeError("train: dataset dims (" + std::to_string(train_set.dim_x()) + ", " +
                         std::to_string(train_set.dim_c()) + ") do not match model config");
    }
    if (val_set.rows() > 0 &&
        (val_set.dim_x() != model_config.dim_x || val_set.dim_c() != model_config.dim_c)) {
        throw ShapeError("train: validation dims do not match model config");
    }

    TrainResult result{init_params(model_config, train_config.seed), {}};
    if (train_config.max_epochs == 0) return result;
    if (train_set.rows() == 0) throw ValueError("train: empty training set");
    if (val_set.rows() == 0) throw ValueError("train: empty validation set");

    JlvaeParams params = result.params;
    AdamState adam = AdamState::zeros(params);
    Rng root(train_config.seed);

    const std::size_t L = model_config.mc_samples_train;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t epochs_since_best = 0;

    for (std::size_t epoch = 0; epoch < train_config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng epoch_rng = root.child(epoch + 1);
        Rng shuffle_rng = epoch_rng.child(0);
        Rng eps_rng = epoch_rng.child(1);

        const auto batches = make_batches(train_set.rows(), train_config.batch_size, shuffle_rng);
        LossBreakdown epoch_acc;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& batch = batches[bi];
            const Matrix x = gather_rows(train_set.X, batch);
            const Matrix c = gather_rows(train_set.C, batch);
            Matrix eps_x(batch.size() * L, model_config.latent_x);
            Matrix eps_c(batch.size() * L, model_config.latent_c);
            for (double& e : eps_x.data()) e = eps_rng.normal();
            for (double& e : eps_c.data()) e = eps_rng.normal();

            try {
                auto [loss, cache] = loss_forward(params, x, c, eps_x, eps_c, model_config);
                const JlvaeGrads grads = loss_backward(params, cache);
                adam_step(adam, params, grads, train_config);
                epoch_acc = scaled_add(epoch_acc, loss, static_cast<double>(batch.size()));
            } catch (const NonFiniteError& e) {
                throw NonFiniteError(e.term(), "training aborted at epoch " +
                                                   std::to_string(epoch) + ", batch " +
                                                   std::to_string(bi) + ": " + e.what());
            }
        }
        const LossBreakdown train_loss = scaled_add(
            LossBreakdown{}, epoch_acc, 1.0 / static_cast<double>(train_set.rows()));
        const LossBreakdown val_loss =
            evaluate_loss(params, val_set, model_config, train_config.batch_size);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_loss;
        rec.val_loss = val_loss;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.epochs.push_back(rec);

        if (val_loss.total < best_val) {
            best_val = val_loss.total;
            result.params = params;
            result.history.best_epoch = epoch;
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (epochs_since_best >= train_config.patience) break;
        }
    }
    return result;
}

std::string history_to_csv(const TrainHistory& history) {
    std::ostringstream ss;
    ss << "epoch,train_total,train_kl_zx,train_kl_zc,train_recon_x,train_recon_c,train_l1,"
          "val_total,seconds\n";
    for (const auto& rec : history.epochs) {
        ss << rec.epoch << ',' << format_double(rec.train_loss.total) << ','
           << format_double(rec.train_loss.kl_zx) << ',' << format_double(rec.train_loss.kl_zc)
           << ',' << format_double(rec.train_loss.recon_x) << ','
           << format_double(rec.train_loss.recon_c) << ',' << format_double(rec.train_loss.l1)
           << ',' << format_double(rec.val_loss.total) << ',' << format_double(rec.seconds)
           << '\n';
    }
    return ss.str();
}

}  // namespace jlvae
