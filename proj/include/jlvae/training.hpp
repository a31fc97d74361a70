#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "jlvae/model.hpp"
#include "jlvae/rng.hpp"

namespace jlvae {

struct TrainConfig {
    std::size_t batch_size = 200;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t max_epochs = 100;
    std::size_t patience = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

// First/second-moment buffers mirroring the parameter layout.
struct AdamState {
    std::size_t step = 0;
    JlvaeGrads m, v;

    static AdamState zeros(const JlvaeParams& params);
};

struct EpochRecord {
    std::size_t epoch = 0;
    LossBreakdown train_loss;  // row-weighted mean over the epoch's batches
    LossBreakdown val_loss;    // deterministic (eps = 0)
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::optional<std::size_t> best_epoch;
};

struct TrainResult {
    JlvaeParams params;  // parameters from the best validation epoch
    TrainHistory history;
};

// Bias-corrected Adam update, in place.
void adam_step(AdamState& state, JlvaeParams& params, const JlvaeGrads& grads,
               const TrainConfig& config);

// One epoch's minibatches: a seeded permutation of [0, n) cut into
// consecutive chunks; the last batch may be short.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   Rng& rng);

class PreparedDataset;  // data/dataset.hpp

// SGVB loop: fresh eps ~ N(0, I) per training batch, eps = 0 for validation,
// early stop after `patience` epochs without a new best validation loss.
TrainResult train(const PreparedDataset& train_set, const PreparedDataset& val_set,
                  const ModelConfig& model_config, const TrainConfig& train_config);

// Deterministic loss over a dataset, evaluated in batches.
LossBreakdown evaluate_loss(const JlvaeParams& params, const PreparedDataset& data,
                            const ModelConfig& model_config, std::size_t batch_size);

// epoch, train term columns, val_total, seconds.
std::string history_to_csv(const TrainHistory& history);

}  // namespace jlvae
