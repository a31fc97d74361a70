#include "jlvae/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "jlvae/error.hpp"
#include "jlvae/rng.hpp"

namespace jlvae {

using nlohmann::json;

void SynthSpec::validate() const {
    if (n_rows == 0) throw ConfigError("synth: n_rows must be >= 1");
    if (dim_x == 0 || dim_c == 0 || latent_x == 0 || latent_c == 0) {
        throw ConfigError("synth: dims must all be >= 1");
    }
    if (noise_x < 0.0 || noise_c < 0.0) throw ConfigError("synth: noise scales must be >= 0");
    if (anomaly_fraction < 0.0 || anomaly_fraction > 1.0) {
        throw ConfigError("synth: anomaly_fraction must lie in [0, 1]");
    }
}

SynthSpec SynthSpec::plant(std::size_t n_rows) {
    SynthSpec s;
    s.n_rows = n_rows;
    s.dim_x = 28;
    s.dim_c = 38;
    s.latent_x = 5;
    s.latent_c = 2;
    s.noise_x = 0.02;
    s.noise_c = 0.02;
    s.anomaly_fraction = 0.01;
    s.anomaly_scale = 2.5;
    return s;
}

std::string SynthSpec::to_json() const {
    json j;
    j["n_rows"] = n_rows;
    j["dim_x"] = dim_x;
    j["dim_c"] = dim_c;
    j["latent_x"] = latent_x;
    j["latent_c"] = latent_c;
    j["noise_x"] = noise_x;
    j["noise_c"] = noise_c;
    j["anomaly_fraction"] = anomaly_fraction;
    j["anomaly_scale"] = anomaly_scale;
    j["cross_coupling"] = cross_coupling;
    return j.dump();
}

SynthSpec SynthSpec::from_json(const std::string& text) {
    const json j = json::parse(text);
    SynthSpec s;
    s.n_rows = j.at("n_rows").get<std::size_t>();
    s.dim_x = j.at("dim_x").get<std::size_t>();
    s.dim_c = j.at("dim_c").get<std::size_t>();
    s.latent_x = j.at("latent_x").get<std::size_t>();
    s.latent_c = j.at("latent_c").get<std::size_t>();
    s.noise_x = j.value("noise_x", 0.01);
    s.noise_c = j.value("noise_c", 0.01);
    s.anomaly_fraction = j.value("anomaly_fraction", 0.0);
    s.anomaly_scale = j.value("anomaly_scale", 1.0);
    s.cross_coupling = j.value("cross_coupling", 1.0);
    return s;
}

namespace {

Matrix random_normal_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = scale * rng.normal();
    return m;
}

void minmax_scale_columns(Matrix& m) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double lo = m(0, j), hi = m(0, j);
        for (std::size_t i = 1; i < m.rows(); ++i) {
            lo = std::min(lo, m(i, j));
            hi = std::max(hi, m(i, j));
        }
        const double range = hi - lo;
        for (std::size_t i = 0; i < m.rows(); ++i) {
            m(i, j) = range > 0.0 ? (m(i, j) - lo) / range : 0.0;
        }
    }
}

}  // namespace

SynthResult synth_generate(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng root(seed);
    Rng factors_rng = root.child(0);
    Rng latent_rng = root.child(1);
    Rng noise_rng = root.child(2);
    Rng pick_rng = root.child(3);
    Rng anomaly_rng = root.child(4);

    const double sx = 1.0 / std::sqrt(static_cast<double>(spec.latent_x));
    const double sc = 1.0 / std::sqrt(static_cast<double>(spec.latent_c));
    const Matrix A = random_normal_matrix(spec.latent_c, spec.dim_c, sc, factors_rng);
    const Matrix B = random_normal_matrix(spec.latent_x, spec.dim_x, sx, factors_rng);
    Matrix D = random_normal_matrix(spec.latent_c, spec.dim_x, sc, factors_rng);
    if (spec.cross_coupling != 1.0) {
        for (double& v : D.data()) v *= spec.cross_coupling;
    }

    SynthResult out;
    out.z_x = random_normal_matrix(spec.n_rows, spec.latent_x, 1.0, latent_rng);
    out.z_c = random_normal_matrix(spec.n_rows, spec.latent_c, 1.0, latent_rng);

    Matrix C = matmul(out.z_c, A);
    Matrix X = matmul(out.z_x, B);
    {
        const Matrix context_part = matmul(out.z_c, D);
        for (std::size_t i = 0; i < X.size(); ++i) X.data()[i] += context_part.data()[i];
    }
    for (double& v : C.data()) v += spec.noise_c * noise_rng.normal();
    for (double& v : X.data()) v += spec.noise_x * noise_rng.normal();

    // Context-inconsistent rows: x regenerated from fresh latents while c
    // keeps the original z_c.
    const std::size_t n_anom = static_cast<std::size_t>(
        std::llround(spec.anomaly_fraction * static_cast<double>(spec.n_rows)));
    std::vector<std::size_t> order(spec.n_rows);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = pick_rng.uniform_index(i);
        std::swap(order[i - 1], order[j]);
    }
    std::vector<std::size_t> anom_rows(order.begin(), order.begin() + n_anom);
    std::sort(anom_rows.begin(), anom_rows.end());

    std::vector<std::uint8_t> labels(spec.n_rows, 0);
    for (const std::size_t row : anom_rows) {
        labels[row] = 1;
        std::vector<double> zx(spec.latent_x), zc(spec.latent_c);
        for (double& v : zx) v = spec.anomaly_scale * anomaly_rng.normal();
        for (double& v : zc) v = spec.anomaly_scale * anomaly_rng.normal();
        double* xrow = X.row_ptr(row);
        for (std::size_t j = 0; j < spec.dim_x; ++j) {
            double v = 0.0;
            for (std::size_t p = 0; p < spec.latent_x; ++p) v += zx[p] * B(p, j);
            for (std::size_t p = 0; p < spec.latent_c; ++p) v += zc[p] * D(p, j);
            xrow[j] = v + spec.noise_x * anomaly_rng.normal();
        }
    }

    minmax_scale_columns(X);
    minmax_scale_columns(C);

    out.data.X = std::move(X);
    out.data.C = std::move(C);
    out.data.labels = std::move(labels);
    out.data.row_ids.resize(spec.n_rows);
    std::iota(out.data.row_ids.begin(), out.data.row_ids.end(), 0);
    out.data.validate();
    return out;
}

}  // namespace jlvae
