#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "jlvae/error.hpp"
#include "jlvae/matrix.hpp"
#include "jlvae/mlp.hpp"
#include "jlvae/rng.hpp"

using namespace jlvae;

namespace {

MlpLayer make_layer(Matrix weights, std::vector<double> bias, Activation act) {
    return MlpLayer{std::move(weights), std::move(bias), act};
}

Mlp random_mlp(const std::vector<std::size_t>& widths, Activation hidden_act, Rng& rng) {
    Mlp mlp;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        Matrix w(widths[i], widths[i + 1]);
        for (double& v : w.data()) v = rng.uniform(-1.0, 1.0);
        std::vector<double> b(widths[i + 1]);
        for (double& v : b) v = rng.uniform(-0.5, 0.5);
        const bool last = i + 2 == widths.size();
        mlp.layers.push_back(make_layer(std::move(w), std::move(b),
                                        last ? Activation::Linear : hidden_act));
    }
    return mlp;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(-2.0, 2.0);
    return m;
}

std::vector<double*> mlp_param_pointers(Mlp& mlp) {
    std::vector<double*> out;
    for (auto& layer : mlp.layers) {
        for (double& w : layer.weights.data()) out.push_back(&w);
        for (double& b : layer.bias) out.push_back(&b);
    }
    return out;
}

std::vector<double> flatten_grads(const MlpGrads& grads) {
    std::vector<double> out;
    for (const auto& layer : grads.layers) {
        out.insert(out.end(), layer.weights.data().begin(), layer.weights.data().end());
        out.insert(out.end(), layer.bias.begin(), layer.bias.end());
    }
    return out;
}

double max_rel_err(const std::vector<double>& analytic, const std::vector<double>& numeric) {
    REQUIRE(analytic.size() == numeric.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic[i], n = numeric[i];
        if (std::abs(a) < 1e-8 && std::abs(n) < 1e-8) continue;
        worst = std::max(worst, std::abs(a - n) / std::max(std::abs(a), std::abs(n)));
    }
    return worst;
}

}  // namespace

TEST_CASE("matrix construction is checked") {
    CHECK_THROWS_AS(Matrix(2, 2, {1.0, 2.0, 3.0}), ShapeError);
    CHECK_THROWS_AS(Matrix(1, 2, {1.0, std::nan("")}), ValueError);
    CHECK_THROWS_AS(Matrix(1, 1, {INFINITY}), ValueError);
    const Matrix ok(2, 2, {1.0, 2.0, 3.0, 4.0});
    CHECK(ok(1, 0) == 3.0);
}

TEST_CASE("affine_forward identity and relu clamp") {
    const Matrix input(1, 2, {3.0, -1.0});

    auto layer = make_layer(Matrix::identity(2), {0.0, 0.0}, Activation::Linear);
    Matrix out = affine_forward(input, layer);
    CHECK(out(0, 0) == 3.0);
    CHECK(out(0, 1) == -1.0);

    layer.activation = Activation::Relu;
    out = affine_forward(input, layer);
    CHECK(out(0, 0) == 3.0);
    CHECK(out(0, 1) == 0.0);
}

TEST_CASE("affine_forward hand arithmetic") {
    // W = [[2],[1]], b = [1], input [1,1] -> 2+1+1 = 4
    const auto layer = make_layer(Matrix(2, 1, {2.0, 1.0}), {1.0}, Activation::Linear);
    const Matrix out = affine_forward(Matrix(1, 2, {1.0, 1.0}), layer);
    CHECK(out(0, 0) == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("affine_forward rejects shape mismatch naming both shapes") {
    const auto layer = make_layer(Matrix(3, 2), {0.0, 0.0}, Activation::Linear);
    try {
        affine_forward(Matrix(1, 2), layer);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("1x2") != std::string::npos);
        CHECK(msg.find("3x2") != std::string::npos);
    }
}

TEST_CASE("mlp_forward identity layer and zero network") {
    Mlp id;
    id.layers.push_back(make_layer(Matrix::identity(3), {0.0, 0.0, 0.0}, Activation::Linear));
    Rng rng(7);
    const Matrix input = random_matrix(4, 3, rng);
    const Matrix out = mlp_forward(id, input).output();
    for (std::size_t i = 0; i < input.size(); ++i) CHECK(out.data()[i] == input.data()[i]);

    Mlp zero;
    zero.layers.push_back(make_layer(Matrix(3, 5), std::vector<double>(5, 0.0), Activation::Relu));
    zero.layers.push_back(make_layer(Matrix(5, 2), std::vector<double>(2, 0.0), Activation::Linear));
    const Matrix zout = mlp_forward(zero, input).output();
    for (const double v : zout.data()) CHECK(v == 0.0);
}

TEST_CASE("mlp_forward kdd-sized recognizer shape") {
    Rng rng(3);
    Mlp mlp = random_mlp({65, 58, 32, 8}, Activation::Relu, rng);
    const Matrix input = random_matrix(200, 65, rng);
    const Matrix out = mlp_forward(mlp, input).output();
    CHECK(out.rows() == 200);
    CHECK(out.cols() == 8);
}

TEST_CASE("mlp_backward identity chain rule and relu gating") {
    Mlp id;
    id.layers.push_back(make_layer(Matrix::identity(2), {0.0, 0.0}, Activation::Linear));
    const Matrix input(1, 2, {0.3, -0.7});
    const auto cache = mlp_forward(id, input);
    const Matrix g(1, 2, {2.5, -1.5});
    auto grads = zeros_like(id);
    const Matrix gin = mlp_backward(id, cache, g, grads);
    CHECK(gin(0, 0) == 2.5);
    CHECK(gin(0, 1) == -1.5);

    Mlp relu;
    relu.layers.push_back(make_layer(Matrix::identity(2), {0.0, 0.0}, Activation::Relu));
    const Matrix neg_input(1, 2, {1.0, -1.0});  // second unit pre-activation negative
    const auto rcache = mlp_forward(relu, neg_input);
    auto rgrads = zeros_like(relu);
    const Matrix rgin = mlp_backward(relu, rcache, g, rgrads);
    CHECK(rgin(0, 0) == 2.5);
    CHECK(rgin(0, 1) == 0.0);
}

TEST_CASE("mlp_backward rejects stale cache") {
    Rng rng(11);
    Mlp a = random_mlp({3, 4, 2}, Activation::Relu, rng);
    Mlp b = random_mlp({3, 5, 2}, Activation::Relu, rng);
    const Matrix input = random_matrix(2, 3, rng);
    const auto cache = mlp_forward(a, input);
    auto grads = zeros_like(b);
    CHECK_THROWS_AS(mlp_backward(b, cache, Matrix(2, 2), grads), ShapeError);
}

TEST_CASE("finite_diff_grad basics") {
    double x = 3.0;
    std::vector<double*> params = {&x};
    const auto grad = finite_diff_grad([&] { return x * x; }, params, 1e-5);
    CHECK(grad[0] == doctest::Approx(6.0).epsilon(1e-8));

    const auto zero = finite_diff_grad([&] { return 42.0; }, params, 1e-5);
    CHECK(zero[0] == 0.0);

    CHECK_THROWS_AS(finite_diff_grad([&] { return x; }, params, 0.0), ValueError);
}

TEST_CASE("random 3-layer gradcheck vs central differences") {
    Rng rng(1234);
    Mlp mlp = random_mlp({4, 6, 5, 3}, Activation::Relu, rng);
    const Matrix input = random_matrix(5, 4, rng);
    const Matrix weight = random_matrix(5, 3, rng);  // fixed projection

    auto loss = [&] {
        const Matrix out = mlp_forward(mlp, input).output();
        double acc = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) acc += out.data()[i] * weight.data()[i];
        return acc;
    };

    const auto cache = mlp_forward(mlp, input);
    auto grads = zeros_like(mlp);
    mlp_backward(mlp, cache, weight, grads);

    const auto pointers = mlp_param_pointers(mlp);
    const auto numeric = finite_diff_grad(loss, pointers, 1e-5);
    CHECK(max_rel_err(flatten_grads(grads), numeric) < 1e-4);
}

TEST_CASE("gradcheck over random layer shapes up to 16x16") {
    Rng rng(99);
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t d0 = 1 + rng.uniform_index(16);
        const std::size_t d1 = 1 + rng.uniform_index(16);
        const std::size_t d2 = 1 + rng.uniform_index(16);
        const std::size_t n = 1 + rng.uniform_index(6);
        const Activation act = trial % 2 ? Activation::Relu : Activation::Linear;
        Mlp mlp = random_mlp({d0, d1, d2}, act, rng);
        const Matrix input = random_matrix(n, d0, rng);
        const Matrix weight = random_matrix(n, d2, rng);

        auto loss = [&] {
            const Matrix out = mlp_forward(mlp, input).output();
            double acc = 0.0;
            for (std::size_t i = 0; i < out.size(); ++i) acc += out.data()[i] * weight.data()[i];
            return acc;
        };
        const auto cache = mlp_forward(mlp, input);
        auto grads = zeros_like(mlp);
        mlp_backward(mlp, cache, weight, grads);
        const auto numeric = finite_diff_grad(loss, mlp_param_pointers(mlp), 1e-5);
        CHECK(max_rel_err(flatten_grads(grads), numeric) < 1e-4);
    }
}

TEST_CASE("linear affine map is linear for zero bias") {
    Rng rng(5);
    const auto layer = make_layer(random_matrix(4, 3, rng), {0.0, 0.0, 0.0}, Activation::Linear);
    const Matrix x = random_matrix(2, 4, rng);
    const Matrix y = random_matrix(2, 4, rng);
    const double a = 1.7, b = -0.4;

    Matrix combo(2, 4);
    for (std::size_t i = 0; i < combo.size(); ++i) {
        combo.data()[i] = a * x.data()[i] + b * y.data()[i];
    }
    const Matrix lhs = affine_forward(combo, layer);
    const Matrix fx = affine_forward(x, layer);
    const Matrix fy = affine_forward(y, layer);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        CHECK(lhs.data()[i] ==
              doctest::Approx(a * fx.data()[i] + b * fy.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("relu output non-negative and idempotent") {
    Rng rng(21);
    const auto relu = make_layer(Matrix::identity(6), std::vector<double>(6, 0.0),
                                 Activation::Relu);
    const Matrix x = random_matrix(10, 6, rng);
    const Matrix once = affine_forward(x, relu);
    const Matrix twice = affine_forward(once, relu);
    for (std::size_t i = 0; i < once.size(); ++i) {
        CHECK(once.data()[i] >= 0.0);
        CHECK(once.data()[i] == twice.data()[i]);
    }
}

TEST_CASE("batch forward equals row-wise forward exactly") {
    Rng rng(31);
    Mlp mlp = random_mlp({5, 7, 4}, Activation::Relu, rng);
    const Matrix batch = random_matrix(9, 5, rng);
    const Matrix full = mlp_forward(mlp, batch).output();
    for (std::size_t r = 0; r < batch.rows(); ++r) {
        Matrix row(1, 5);
        for (std::size_t j = 0; j < 5; ++j) row(0, j) = batch(r, j);
        const Matrix out = mlp_forward(mlp, row).output();
        for (std::size_t j = 0; j < 4; ++j) CHECK(out(0, j) == full(r, j));
    }
}
