#include "jlvae/mlp.hpp"

#include <cmath>

#include "jlvae/error.hpp"

namespace jlvae {

std::string activation_name(Activation a) {
    return a == Activation::Relu ? "relu" : "linear";
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "linear") return Activation::Linear;
    throw ConfigError("unknown activation '" + name + "'");
}

void Mlp::validate() const {
    if (layers.empty()) throw ShapeError("mlp has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.bias.size() != l.fan_out()) {
            throw ShapeError("layer " + std::to_string(i) + ": bias length " +
                             std::to_string(l.bias.size()) + " does not match weights " +
                             l.weights.shape_str());
        }
        if (i + 1 < layers.size() && l.fan_out() != layers[i + 1].fan_in()) {
            throw ShapeError("layer " + std::to_string(i) + " fan_out " +
                             std::to_string(l.fan_out()) + " does not match layer " +
                             std::to_string(i + 1) + " fan_in " +
                             std::to_string(layers[i + 1].fan_in()));
        }
    }
}

Matrix affine_forward(const Matrix& input, const MlpLayer& layer) {
    if (input.cols() != layer.fan_in()) {
        throw ShapeError("affine_forward: input " + input.shape_str() + " vs weights " +
                         layer.weights.shape_str());
    }
    Matrix out = matmul(input, layer.weights);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        double* row = out.row_ptr(i);
        for (std::size_t j = 0; j < out.cols(); ++j) {
            double v = row[j] + layer.bias[j];
            if (layer.activation == Activation::Relu && v < 0.0) v = 0.0;
            row[j] = v;
        }
    }
    return out;
}

MlpCache mlp_forward(const Mlp& mlp, const Matrix& input) {
    if (mlp.layers.empty()) throw ShapeError("mlp_forward: mlp has no layers");
    MlpCache cache;
    cache.activations.reserve(mlp.layers.size() + 1);
    cache.activations.push_back(input);
    for (const auto& layer : mlp.layers) {
        cache.activations.push_back(affine_forward(cache.activations.back(), layer));
    }
    return cache;
}

MlpGrads zeros_like(const Mlp& mlp) {
    MlpGrads g;
    g.layers.reserve(mlp.layers.size());
    for (const auto& l : mlp.layers) {
        g.layers.push_back({Matrix(l.weights.rows(), l.weights.cols()),
                            std::vector<double>(l.bias.size(), 0.0)});
    }
    return g;
}

Matrix mlp_backward(const Mlp& mlp, const MlpCache& cache, const Matrix& grad_output,
                    MlpGrads& accum) {
    if (cache.activations.size() != mlp.layers.size() + 1) {
        throw ShapeError("mlp_backward: cache holds " +
                         std::to_string(cache.activations.size()) + " activations for " +
                         std::to_string(mlp.layers.size()) + " layers");
    }
    if (accum.layers.size() != mlp.layers.size()) {
        throw ShapeError("mlp_backward: gradient accumulator layer count mismatch");
    }
    require_same_shape(grad_output, cache.activations.back(), "mlp_backward grad_output");

    Matrix g = grad_output;
    for (std::size_t li = mlp.layers.size(); li-- > 0;) {
        const auto& layer = mlp.layers[li];
        const Matrix& in = cache.activations[li];
        const Matrix& out = cache.activations[li + 1];
        if (in.cols() != layer.fan_in() || in.rows() != g.rows()) {
            throw ShapeError("mlp_backward: stale cache at layer " + std::to_string(li));
        }

        if (layer.activation == Activation::Relu) {
            // relu'(pre) = 1 iff output > 0 (subgradient at 0 taken as 0)
            for (std::size_t i = 0; i < g.rows(); ++i) {
                double* grow = g.row_ptr(i);
                const double* orow = out.row_ptr(i);
                for (std::size_t j = 0; j < g.cols(); ++j) {
                    if (orow[j] <= 0.0) grow[j] = 0.0;
                }
            }
        }

        auto& acc = accum.layers[li];
        for (std::size_t i = 0; i < g.rows(); ++i) {
            const double* grow = g.row_ptr(i);
            for (std::size_t j = 0; j < g.cols(); ++j) acc.bias[j] += grow[j];
        }
        {
            Matrix gw = matmul_trans_a(in, g);
            auto dst = acc.weights.data();
            auto src = gw.data();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
        g = matmul_trans_b(g, layer.weights);
    }
    return g;
}

std::vector<double> finite_diff_grad(const std::function<double()>& f,
                                     std::span<double* const> params, double eps) {
    if (eps <= 0.0) throw ValueError("finite_diff_grad: eps must be positive");
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        double* p = params[i];
        const double saved = *p;
        *p = saved + eps;
        const double fp = f();
        *p = saved - eps;
        const double fm = f();
        *p = saved;
        grad[i] = (fp - fm) / (2.0 * eps);
    }
    return grad;
}

}  // namespace jlvae
