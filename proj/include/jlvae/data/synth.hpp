#pragma once

#include <cstdint>
#include <string>

#include "jlvae/data/dataset.hpp"

namespace jlvae {

// Linear-Gaussian generator following the two-latent graphical model:
// c = z_c A + noise, x = z_x B + z_c D + noise, with a chosen fraction of
// rows made context-inconsistent by redrawing the latents that produce x.
struct SynthSpec {
    std::size_t n_rows = 0;
    std::size_t dim_x = 0;
    std::size_t dim_c = 0;
    std::size_t latent_x = 0;
    std::size_t latent_c = 0;
    double noise_x = 0.01;
    double noise_c = 0.01;
    double anomaly_fraction = 0.0;
    // Amplitude applied to the redrawn latents of anomalous rows; values
    // above 1 push anomalies off the normal manifold far enough for point
    // methods to see them marginally.
    double anomaly_scale = 1.0;
    // Multiplier on D; 0 removes the context path into x entirely.
    double cross_coupling = 1.0;

    void validate() const;

    // 28 behavioral / 38 contextual attributes, latents 5 and 2, matching
    // ModelConfig::plant_synth.
    static SynthSpec plant(std::size_t n_rows);

    std::string to_json() const;
    static SynthSpec from_json(const std::string& text);
};

struct SynthResult {
    PreparedDataset data;
    Matrix z_x;  // ground-truth latents, one row per observation
    Matrix z_c;
};

// Deterministic per seed; labels mark exactly the injected rows; every
// column of X and C min-max scaled to [0, 1].
SynthResult synth_generate(const SynthSpec& spec, std::uint64_t seed);

}  // namespace jlvae
