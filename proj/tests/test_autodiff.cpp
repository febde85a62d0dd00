#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <random>

#include "gqe/autodiff.hpp"

using namespace gqe::ad;

namespace {

// Central finite difference of f with respect to component i of t.
double fd_grad(Tensor& t, std::size_t i, const std::function<double()>& f, double h = 1e-5) {
    NoGradGuard no_grad;
    const double saved = t.values()[i];
    t.values()[i] = saved + h;
    const double up = f();
    t.values()[i] = saved - h;
    const double down = f();
    t.values()[i] = saved;
    return (up - down) / (2 * h);
}

}  // namespace

TEST_CASE("softmax on [0,0] with closed-form gradient") {
    Tensor x = Tensor::from_values({1, 2}, {0.0, 0.0}, true);
    Tensor y = softmax_rows(x);
    CHECK(y.values()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(y.values()[1] == doctest::Approx(0.5).epsilon(1e-15));
    // d y0 / d x = [y0(1-y0), -y0 y1] = [0.25, -0.25]
    Tensor first = gather_cols(y, {0});
    backward(reduce_sum_all(first));
    CHECK(x.grad()[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(x.grad()[1] == doctest::Approx(-0.25).epsilon(1e-12));
}

TEST_CASE("matmul with identity passes values and gradients through") {
    Tensor eye = Tensor::from_values({2, 2}, {1, 0, 0, 1}, false);
    Tensor x = Tensor::from_values({2, 2}, {1, 2, 3, 4}, true);
    Tensor y = matmul(eye, x);
    for (int i = 0; i < 4; ++i) CHECK(y.values()[i] == doctest::Approx(x.values()[i]));
    backward(reduce_sum_all(y));
    for (int i = 0; i < 4; ++i) CHECK(x.grad()[i] == doctest::Approx(1.0));
}

TEST_CASE("gelu value and finite-difference gradient") {
    Tensor x = Tensor::from_values({1}, {1.0}, true);
    Tensor y = gelu(x);
    CHECK(y.values()[0] == doctest::Approx(0.841192).epsilon(1e-5));
    backward(reduce_sum_all(y));
    double fd = fd_grad(x, 0, [&] { return gelu(x).values()[0]; });
    CHECK(x.grad()[0] == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("backward of sum of squares") {
    Tensor w = Tensor::from_values({2}, {1.0, 2.0}, true);
    Tensor loss = reduce_sum_all(mul(w, w));
    backward(loss);
    CHECK(w.grad()[0] == doctest::Approx(2.0));
    CHECK(w.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("backward requires a scalar") {
    Tensor w = Tensor::from_values({2}, {1.0, 2.0}, true);
    Tensor y = mul(w, w);
    CHECK_THROWS_AS(backward(y), std::invalid_argument);
}

TEST_CASE("detached tensors receive no gradient") {
    Tensor w = Tensor::from_values({2}, {1.0, 2.0}, true);
    Tensor d = w.detach();
    Tensor loss = reduce_sum_all(mul(d, d));
    CHECK_FALSE(loss.requires_grad());
    Tensor mixed = reduce_sum_all(add(mul(w, w), mul(d, d)));
    backward(mixed);
    CHECK(w.grad()[0] == doctest::Approx(2.0));
    CHECK(d.node()->grad.empty());
}

TEST_CASE("repeated backward accumulates into leaves") {
    Tensor w = Tensor::from_values({1}, {3.0}, true);
    backward(reduce_sum_all(mul(w, w)));
    backward(reduce_sum_all(mul(w, w)));
    CHECK(w.grad()[0] == doctest::Approx(12.0));
    w.zero_grad();
    backward(reduce_sum_all(mul(w, w)));
    CHECK(w.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("linearity of backward over a sum") {
    auto build = [](Tensor& w) { return reduce_sum_all(mul(w, exp_values(w))); };
    Tensor w1 = Tensor::from_values({3}, {0.1, -0.4, 0.7}, true);
    Tensor a = build(w1);
    Tensor b = reduce_sum_all(sin_values(w1));
    backward(add(a, b));
    std::vector<double> combined = w1.grad();

    Tensor w2 = Tensor::from_values({3}, {0.1, -0.4, 0.7}, true);
    backward(build(w2));
    backward(reduce_sum_all(sin_values(w2)));
    for (int i = 0; i < 3; ++i) CHECK(combined[i] == doctest::Approx(w2.grad()[i]).epsilon(1e-13));
}

TEST_CASE("shape mismatch error names both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({3, 3});
    try {
        add(a, b);
        FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[3,3]") != std::string::npos);
    }
}

TEST_CASE("composed graph matches finite differences") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g(0.0, 0.5);
    auto randvec = [&](std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) x = g(rng);
        return v;
    };
    Tensor w1 = Tensor::from_values({4, 6}, randvec(24), true);
    Tensor b1 = Tensor::from_values({6}, randvec(6), true);
    Tensor w2 = Tensor::from_values({6, 3}, randvec(18), true);
    Tensor gain = Tensor::from_values({3}, {1.0, 0.9, 1.1}, true);
    Tensor bias = Tensor::from_values({3}, {0.0, 0.1, -0.1}, true);
    Tensor x = Tensor::from_values({5, 4}, randvec(20), false);

    auto forward = [&]() {
        Tensor h = gelu(add_rowwise(matmul(x, w1), b1));
        Tensor o = layer_norm_rows(matmul(h, w2), gain, bias);
        Tensor sm = softmax_rows(o);
        return reduce_mean_all(mul(sm, tanh_values(o)));
    };
    Tensor loss = forward();
    backward(loss);

    std::vector<Tensor*> params = {&w1, &b1, &w2, &gain, &bias};
    std::uniform_int_distribution<std::size_t> pick(0, 4);
    int checked = 0;
    for (int trial = 0; trial < 60; ++trial) {
        Tensor* p = params[pick(rng)];
        std::size_t i = rng() % p->size();
        double fd = fd_grad(*p, i, [&] { return forward().item(); });
        double an = p->grad()[i];
        double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
        CHECK(std::abs(fd - an) / denom < 1e-4);
        ++checked;
    }
    CHECK(checked >= 50);
}

TEST_CASE("clamp and minimum gradients route correctly") {
    Tensor a = Tensor::from_values({3}, {-2.0, 0.5, 3.0}, true);
    Tensor c = clamp(a, 0.0, 1.0);
    CHECK(c.values() == std::vector<double>{0.0, 0.5, 1.0});
    backward(reduce_sum_all(c));
    CHECK(a.grad() == std::vector<double>{0.0, 1.0, 0.0});

    Tensor x = Tensor::from_values({2}, {1.0, 5.0}, true);
    Tensor y = Tensor::from_values({2}, {2.0, 4.0}, true);
    backward(reduce_sum_all(minimum(x, y)));
    CHECK(x.grad() == std::vector<double>{1.0, 0.0});
    CHECK(y.grad() == std::vector<double>{0.0, 1.0});
}

TEST_CASE("causal mask blocks gradient flow from the future") {
    Tensor s = Tensor::from_values({3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}, true);
    Tensor m = causal_mask_fill(s, -1e30);
    CHECK(m.values()[1] == -1e30);
    CHECK(m.values()[3] == doctest::Approx(4.0));
    backward(reduce_sum_all(m));
    CHECK(s.grad()[1] == 0.0);
    CHECK(s.grad()[3] == 1.0);
}

TEST_CASE("no-grad guard suppresses graph construction") {
    Tensor w = Tensor::from_values({2}, {1.0, 2.0}, true);
    NoGradGuard guard;
    Tensor y = mul(w, w);
    CHECK_FALSE(y.requires_grad());
}

TEST_CASE("parameter checkpoint round-trips bit-exactly") {
    ParameterSet ps;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> v1(12), v2(5);
    for (auto& x : v1) x = g(rng);
    for (auto& x : v2) x = g(rng);
    ps.create("layer.w", {3, 4}, v1, true);
    ps.create("layer.b", {5}, v2, false);

    const std::string path = "/tmp/gqe_ckpt_test.bin";
    ps.save(path);

    ParameterSet loaded;
    loaded.create("layer.w", {3, 4}, std::vector<double>(12, 0.0), true);
    loaded.create("layer.b", {5}, std::vector<double>(5, 0.0), false);
    loaded.load(path);
    for (int i = 0; i < 12; ++i) CHECK(loaded.all()[0].tensor.values()[i] == v1[i]);
    for (int i = 0; i < 5; ++i) CHECK(loaded.all()[1].tensor.values()[i] == v2[i]);

    ParameterSet wrong;
    wrong.create("other.w", {3, 4}, std::vector<double>(12, 0.0), true);
    wrong.create("layer.b", {5}, std::vector<double>(5, 0.0), false);
    CHECK_THROWS(wrong.load(path));
    std::remove(path.c_str());
}

TEST_CASE("duplicate parameter names are rejected") {
    ParameterSet ps;
    ps.create("w", {1}, {0.0}, true);
    CHECK_THROWS_AS(ps.create("w", {1}, {0.0}, true), std::invalid_argument);
}
