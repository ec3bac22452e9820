#include "doctest.h"

#include <random>

#include "iplan/layers.hpp"
#include "iplan/tensor.hpp"
#include "oracles.hpp"

using namespace iplan::num;

TEST_CASE("backward: polynomial derivative") {
    Var x = leaf(Tensor::vec({1.0, 2.0, 3.0}));
    Var root = sum(mul(x, x));
    backward(root);
    CHECK(x->grad[0] == doctest::Approx(2.0));
    CHECK(x->grad[1] == doctest::Approx(4.0));
    CHECK(x->grad[2] == doctest::Approx(6.0));
}

TEST_CASE("backward: constant root is a no-op") {
    Var c = constant(Tensor::vec({1.0, 2.0}));
    Var root = sum(c);
    CHECK_NOTHROW(backward(root));
    CHECK(c->grad.empty());
}

TEST_CASE("backward: non-scalar root rejected") {
    Var x = leaf(Tensor::vec({1.0, 2.0}));
    Var y = mul(x, x);
    CHECK_THROWS_AS(backward(y), iplan::NumericsError);
}

TEST_CASE("backward: NaN gradient is reported") {
    Var x = leaf(Tensor::vec({0.0}));
    // log(0) = -inf, then 0 * -inf = nan downstream
    Var y = sum(mul(constant(Tensor::vec({0.0})), log_softmax(x)));
    // build a genuinely poisoned root instead
    Var bad = leaf(Tensor::scalar(std::nan("")));
    Var root = mul(bad, bad);
    CHECK_THROWS_AS(backward(root), iplan::NumericsError);
    (void)y;
}

TEST_CASE("MLP gradients match central finite differences") {
    std::mt19937_64 rng(7);
    LinearParams l1 = LinearParams::init(4, 8, rng);
    LinearParams l2 = LinearParams::init(8, 8, rng);
    LinearParams l3 = LinearParams::init(8, 1, rng);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Tensor> inputs;
    for (int i = 0; i < 10; ++i) {
        Tensor x({4});
        for (int d = 0; d < 4; ++d) x[d] = u(rng);
        inputs.push_back(x);
    }
    std::vector<Var> params;
    for (const auto& l : {l1, l2, l3}) {
        params.push_back(l.w);
        params.push_back(l.b);
    }
    auto build = [&]() {
        Var total;
        for (const Tensor& x : inputs) {
            Var h = tanh_v(linear(l1, constant(x)));
            h = tanh_v(linear(l2, h));
            Var o = linear(l3, h);
            total = total ? add(total, sum(o)) : sum(o);
        }
        return total;
    };
    CHECK(oracle::fd_max_rel_error(params, build) < 1e-4);
}

TEST_CASE("gradients flow through min/max/concat/slice/softmax") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Tensor a0({6}), b0({6});
    for (int i = 0; i < 6; ++i) {
        a0[i] = u(rng);
        b0[i] = u(rng) + 0.01 * i;  // avoid exact ties at the min/max kink
    }
    Var a = leaf(a0);
    Var b = leaf(b0);
    auto build = [&]() {
        Var lo = minimum(a, b);
        Var hi = maximum(a, b);
        Var joined = concat({lo, hi});
        Var part = slice(joined, 2, 8);
        Var sm = softmax(part);
        return add(dot(sm, part), index(exp_v(scale(a, 0.3)), 2));
    };
    CHECK(oracle::fd_max_rel_error({a, b}, build) < 1e-4);
}

TEST_CASE("batched ops match per-vector ops") {
    std::mt19937_64 rng(3);
    LinearParams l = LinearParams::init(5, 3, rng);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor xb({4, 5});
    for (int64_t i = 0; i < xb.size(); ++i) xb[i] = u(rng);
    Var rows = linear_rows(l, constant(xb));
    for (int r = 0; r < 4; ++r) {
        Tensor x({5});
        for (int c = 0; c < 5; ++c) x[c] = xb.at(r, c);
        Var single = linear(l, constant(x));
        for (int c = 0; c < 3; ++c)
            CHECK(rows->value.at(r, c) == doctest::Approx(single->value[c]).epsilon(1e-14));
    }
    // log_softmax_rows against the vector version
    Var lsr = log_softmax_rows(rows);
    for (int r = 0; r < 4; ++r) {
        Tensor row({3});
        for (int c = 0; c < 3; ++c) row[c] = rows->value.at(r, c);
        Var ls = log_softmax(constant(row));
        for (int c = 0; c < 3; ++c)
            CHECK(lsr->value.at(r, c) == doctest::Approx(ls->value[c]).epsilon(1e-14));
    }
}

TEST_CASE("dropout") {
    std::mt19937_64 rng(5);
    Tensor big({1000000});
    big.fill(1.0);

    SUBCASE("rate 0 is identity") {
        Var x = constant(big);
        Var y = dropout(x, 0.0, true, rng);
        CHECK(y.get() == x.get());
    }
    SUBCASE("eval mode is identity") {
        Var x = constant(big);
        Var y = dropout(x, 0.5, false, rng);
        CHECK(y.get() == x.get());
    }
    SUBCASE("rate >= 1 rejected") {
        Var x = constant(Tensor::vec({1.0}));
        CHECK_THROWS_AS(dropout(x, 1.0, true, rng), iplan::NumericsError);
    }
    SUBCASE("empirical zero fraction and survivor scaling") {
        Var x = constant(big);
        Var y = dropout(x, 0.1, true, rng);
        int64_t zeros = 0;
        for (int64_t i = 0; i < y->value.size(); ++i) {
            if (y->value[i] == 0.0)
                ++zeros;
            else
                CHECK(y->value[i] == doctest::Approx(1.0 / 0.9));
        }
        double frac = static_cast<double>(zeros) / static_cast<double>(y->value.size());
        CHECK(frac > 0.098);
        CHECK(frac < 0.102);
    }
}

TEST_CASE("forward determinism under a fixed seed") {
    auto run = [](uint64_t seed) {
        std::mt19937_64 rng(seed);
        LinearParams l = LinearParams::init(6, 6, rng);
        Tensor x({6});
        std::uniform_real_distribution<double> u(-1, 1);
        for (int i = 0; i < 6; ++i) x[i] = u(rng);
        Var y = tanh_v(linear(l, constant(x)));
        return y->value.to_vector();
    };
    CHECK(run(42) == run(42));
}
