#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "jlvae/matrix.hpp"

namespace jlvae {

enum class Activation { Relu, Linear };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct MlpLayer {
    Matrix weights;            // fan_in x fan_out
    std::vector<double> bias;  // fan_out
    Activation activation = Activation::Linear;

    std::size_t fan_in() const noexcept { return weights.rows(); }
    std::size_t fan_out() const noexcept { return weights.cols(); }
};

struct Mlp {
    std::vector<MlpLayer> layers;

    std::size_t input_dim() const { return layers.front().fan_in(); }
    std::size_t output_dim() const { return layers.back().fan_out(); }

    // Throws if consecutive layers are dimension-incompatible or a bias
    // length disagrees with its weight matrix.
    void validate() const;
};

// Per-layer sliding record from a forward pass. activations[0] is the input,
// activations[i+1] the output of layer i; relu masks are recovered from the
// stored outputs, so nothing else is needed for backward.
struct MlpCache {
    std::vector<Matrix> activations;

    const Matrix& output() const { return activations.back(); }
};

struct LayerGrads {
    Matrix weights;
    std::vector<double> bias;
};

struct MlpGrads {
    std::vector<LayerGrads> layers;
};

// out[n,j] = act(sum_i in[n,i] * W[i,j] + b[j])
Matrix affine_forward(const Matrix& input, const MlpLayer& layer);

MlpCache mlp_forward(const Mlp& mlp, const Matrix& input);

// Gradients of sum_{n} <grad_output[n], output[n]> w.r.t. every weight, bias
// and the input. `accum` entries must be zero-initialised to the parameter
// shapes (see zeros_like); gradients are accumulated into it so multiple
// backward passes can share one buffer.
Matrix mlp_backward(const Mlp& mlp, const MlpCache& cache, const Matrix& grad_output,
                    MlpGrads& accum);

MlpGrads zeros_like(const Mlp& mlp);

// Central finite differences of f() w.r.t. each value behind `params`,
// perturbing in place. Test oracle for the analytic gradients.
std::vector<double> finite_diff_grad(const std::function<double()>& f,
                                     std::span<double* const> params, double eps);

}  // namespace jlvae
