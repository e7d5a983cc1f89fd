#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "gradcheck.hpp"
#include "swinforge/tensor.hpp"

using swinforge::ContractError;
using swinforge::NumericError;
using swinforge::Rng;
using swinforge::ShapeError;
using swinforge::ag::Tape;
using swinforge::ag::Tensor;

namespace {

template <typename S>
Tensor<S> make(std::vector<int64_t> shape, std::vector<S> data, bool rg = false) {
    return Tensor<S>::from_vector(std::move(shape), std::move(data), rg);
}

}  // namespace

TEST_CASE("matmul identity cases") {
    Tape<double> tape(false);
    auto i2 = make<double>({2, 2}, {1, 0, 0, 1});
    auto a = make<double>({2, 2}, {1, 2, 3, 4});

    auto r1 = tape.matmul(i2, i2);
    CHECK(std::equal(r1.data().begin(), r1.data().end(), i2.data().begin()));

    auto r2 = tape.matmul(a, i2);
    CHECK(std::equal(r2.data().begin(), r2.data().end(), a.data().begin()));
}

TEST_CASE("matmul shape errors name both shapes") {
    Tape<double> tape(false);
    auto a = make<double>({2, 3}, {1, 2, 3, 4, 5, 6});
    auto b = make<double>({2, 2}, {1, 0, 0, 1});
    CHECK_THROWS_WITH_AS(tape.matmul(a, b),
                         doctest::Contains("[2,3]"), ShapeError);
    try {
        tape.matmul(a, b);
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("[2,2]") != std::string::npos);
    }
}

TEST_CASE("matmul gradient of sum equals column sums of b and finite differences") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        auto a = gradcheck::random_tensor({3, 4}, rng);
        auto b = gradcheck::random_tensor({4, 2}, rng);
        auto res = gradcheck::check_op(
            [&](Tape<double>& t) { return t.sum_all(t.matmul(a, b)); }, {a, b});
        CHECK(res.max_rel_err <= 1e-6);

        // d sum(ab) / da[i,k] = sum_j b[k,j], independent of i.
        {
            for (auto& t : {a, b}) { Tensor<double> tm = t; tm.zero_grad(); }
            Tape<double> tape;
            auto loss = tape.sum_all(tape.matmul(a, b));
            tape.backward(loss);
            for (int64_t i = 0; i < 3; ++i)
                for (int64_t k = 0; k < 4; ++k) {
                    double expect = b.data()[k * 2] + b.data()[k * 2 + 1];
                    CHECK(a.grad()[i * 4 + k] == doctest::Approx(expect).epsilon(1e-12));
                }
        }
    }
}

TEST_CASE("batched matmul matches per-slice products and gradcheck") {
    Rng rng(7);
    auto a = gradcheck::random_tensor({2, 3, 2, 4}, rng);
    auto b = gradcheck::random_tensor({2, 3, 4, 5}, rng);
    Tape<double> tape(false);
    auto c = tape.matmul(a, b);
    CHECK(c.shape() == std::vector<int64_t>({2, 3, 2, 5}));
    // spot-check one batch slice against a direct loop
    int64_t t = 4;  // batch index (2,1)
    for (int64_t i = 0; i < 2; ++i)
        for (int64_t j = 0; j < 5; ++j) {
            double acc = 0;
            for (int64_t k = 0; k < 4; ++k)
                acc += a.data()[t * 8 + i * 4 + k] * b.data()[t * 20 + k * 5 + j];
            CHECK(c.data()[t * 10 + i * 5 + j] == doctest::Approx(acc).epsilon(1e-12));
        }
    auto res = gradcheck::check_op(
        [&](Tape<double>& tp) { return tp.mean_all(tp.matmul(a, b)); }, {a, b});
    CHECK(res.max_rel_err <= 1e-6);
}

TEST_CASE("softmax basics") {
    Tape<double> tape(false);
    auto x = make<double>({2}, {0, 0});
    auto y = tape.softmax(x, 0);
    CHECK(y.data()[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(y.data()[1] == doctest::Approx(0.5).epsilon(1e-12));

    auto big = make<double>({2}, {1000, 0});
    auto yb = tape.softmax(big, 0);
    CHECK(yb.data()[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(yb.data()[1] == doctest::Approx(0.0).epsilon(1e-12));

    // independently evaluated e^z / sum e^z
    auto z = tape.softmax(make<double>({3}, {1, 2, 3}), 0);
    CHECK(z.data()[0] == doctest::Approx(0.09003057317038046).epsilon(1e-9));
    CHECK(z.data()[1] == doctest::Approx(0.24472847105479767).epsilon(1e-9));
    CHECK(z.data()[2] == doctest::Approx(0.66524095577482183).epsilon(1e-9));
}

TEST_CASE("softmax slices sum to one for any finite input including magnitude 1e3") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        std::vector<double> data(24);
        for (auto& v : data) v = (rng.uniform() * 2 - 1) * 1e3;
        auto x = make<double>({2, 3, 4}, data);
        for (int axis = 0; axis < 3; ++axis) {
            Tape<double> tape(false);
            auto y = tape.softmax(x, axis);
            // sum along axis must be 1 for each (outer, inner) lane
            const auto& s = x.shape();
            int64_t outer = 1, inner = 1;
            for (int i = 0; i < axis; ++i) outer *= s[i];
            for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
            int64_t len = s[axis];
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t in = 0; in < inner; ++in) {
                    double sum = 0;
                    for (int64_t k = 0; k < len; ++k)
                        sum += y.data()[(o * len + k) * inner + in];
                    CHECK(std::abs(sum - 1.0) <= 1e-12);
                }
        }
    }
}

TEST_CASE("softmax and log_softmax gradcheck") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 100);
        auto x = gradcheck::random_tensor({3, 5}, rng, 2.0);
        auto w = gradcheck::random_tensor({3, 5}, rng, 1.0, false);
        auto res = gradcheck::check_op(
            [&](Tape<double>& t) { return t.sum_all(t.mul(t.softmax(x, 1), w)); }, {x});
        CHECK(res.max_rel_err <= 1e-4);
        auto res2 = gradcheck::check_op(
            [&](Tape<double>& t) { return t.sum_all(t.mul(t.log_softmax(x, 1), w)); }, {x});
        CHECK(res2.max_rel_err <= 1e-4);
    }
}

TEST_CASE("layer_norm examples") {
    Tape<double> tape(false);
    auto gain = make<double>({4}, {1, 1, 1, 1});
    auto bias = make<double>({4}, {0, 0, 0, 0});

    auto constant = make<double>({4}, {3, 3, 3, 3});
    auto y = tape.layer_norm(constant, gain, bias, 1e-5);
    for (double v : y.data()) CHECK(std::abs(v) <= 1e-9);

    auto g2 = make<double>({2}, {1, 1});
    auto b2 = make<double>({2}, {0, 0});
    auto x2 = make<double>({2}, {1, 3});
    auto y2 = tape.layer_norm(x2, g2, b2, 1e-12);
    CHECK(y2.data()[0] == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(y2.data()[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("layer_norm gradcheck") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 41);
        auto x = gradcheck::random_tensor({3, 6}, rng);
        auto g = gradcheck::random_tensor({6}, rng);
        auto b = gradcheck::random_tensor({6}, rng);
        auto w = gradcheck::random_tensor({3, 6}, rng, 1.0, false);
        auto res = gradcheck::check_op(
            [&](Tape<double>& t) {
                return t.sum_all(t.mul(t.layer_norm(x, g, b, 1e-5), w));
            },
            {x, g, b});
        CHECK(res.max_rel_err <= 1e-4);
    }
}

TEST_CASE("gelu examples and gradcheck") {
    Tape<double> tape(false);
    auto x = make<double>({3}, {0.0, 20.0, -20.0});
    auto y = tape.gelu(x);
    CHECK(y.data()[0] == 0.0);
    CHECK(y.data()[1] == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(std::abs(y.data()[2]) <= 1e-12);

    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 77);
        auto t = gradcheck::random_tensor({10}, rng);
        auto res = gradcheck::check_op(
            [&](Tape<double>& tp) { return tp.sum_all(tp.gelu(t)); }, {t});
        CHECK(res.max_rel_err <= 1e-4);
    }
}

TEST_CASE("add, add_suffix, mul, scale semantics and gradients") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 3);
        auto a = gradcheck::random_tensor({2, 3}, rng);
        auto b = gradcheck::random_tensor({2, 3}, rng);
        auto bias = gradcheck::random_tensor({3}, rng);
        auto res = gradcheck::check_op(
            [&](Tape<double>& t) {
                auto s = t.add(t.mul(a, b), t.scale(a, 0.5));
                return t.sum_all(t.add_suffix(s, bias));
            },
            {a, b, bias});
        CHECK(res.max_rel_err <= 1e-4);
    }

    Tape<double> tape(false);
    auto x = make<double>({2, 2}, {1, 2, 3, 4});
    auto y = make<double>({2}, {10, 20});
    auto r = tape.add_suffix(x, y);
    CHECK(r.data()[0] == 11);
    CHECK(r.data()[1] == 22);
    CHECK(r.data()[2] == 13);
    CHECK(r.data()[3] == 24);
    CHECK_THROWS_AS(tape.add(x, make<double>({3}, {1, 2, 3})), ShapeError);
}

TEST_CASE("reshape and permute round trips preserve values exactly") {
    Rng rng(5);
    auto x = gradcheck::random_tensor({2, 3, 4}, rng, 1.0, false);
    Tape<double> tape(false);

    auto r = tape.reshape(tape.reshape(x, {4, 6}), {2, 3, 4});
    CHECK(std::equal(r.data().begin(), r.data().end(), x.data().begin()));

    std::vector<int> p{2, 0, 1}, pinv{1, 2, 0};
    auto pp = tape.permute(tape.permute(x, p), pinv);
    CHECK(pp.shape() == x.shape());
    CHECK(std::equal(pp.data().begin(), pp.data().end(), x.data().begin()));

    // multiset preservation
    auto perm = tape.permute(x, p);
    std::vector<double> s1(x.data().begin(), x.data().end());
    std::vector<double> s2(perm.data().begin(), perm.data().end());
    std::sort(s1.begin(), s1.end());
    std::sort(s2.begin(), s2.end());
    CHECK(s1 == s2);
}

TEST_CASE("permute moves the expected elements") {
    Tape<double> tape(false);
    auto x = make<double>({2, 3}, {0, 1, 2, 3, 4, 5});
    auto t = tape.permute(x, {1, 0});
    CHECK(t.shape() == std::vector<int64_t>({3, 2}));
    CHECK(t.data()[0] == 0);
    CHECK(t.data()[1] == 3);
    CHECK(t.data()[2] == 1);
    CHECK(t.data()[5] == 5);
}

TEST_CASE("reshape and permute gradients move like the data") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed + 11);
        auto x = gradcheck::random_tensor({2, 3, 2}, rng);
        auto w = gradcheck::random_tensor({3, 4}, rng, 1.0, false);
        auto res = gradcheck::check_op(
            [&](Tape<double>& t) {
                auto y = t.permute(x, {1, 0, 2});            // [3,2,2]
                auto z = t.reshape(y, {3, 4});
                return t.sum_all(t.mul(z, w));
            },
            {x});
        CHECK(res.max_rel_err <= 1e-6);
    }
}

TEST_CASE("concat joins slices and routes gradients") {
    Tape<double> tape(false);
    auto a = make<double>({2, 2}, {1, 2, 3, 4});
    auto b = make<double>({2, 1}, {9, 8});
    auto c = tape.concat({a, b}, 1);
    CHECK(c.shape() == std::vector<int64_t>({2, 3}));
    CHECK(c.data()[2] == 9);
    CHECK(c.data()[5] == 8);

    Rng rng(2);
    auto ga = gradcheck::random_tensor({2, 2}, rng);
    auto gb = gradcheck::random_tensor({2, 3}, rng);
    auto w = gradcheck::random_tensor({2, 5}, rng, 1.0, false);
    auto res = gradcheck::check_op(
        [&](Tape<double>& t) { return t.sum_all(t.mul(t.concat({ga, gb}, 1), w)); },
        {ga, gb});
    CHECK(res.max_rel_err <= 1e-6);
}

TEST_CASE("roll is cyclic and invertible") {
    Tape<double> tape(false);
    auto x = make<double>({4}, {0, 1, 2, 3});
    auto r = tape.roll(x, {1}, {0});
    CHECK(r.data()[0] == 3);
    CHECK(r.data()[1] == 0);
    auto back = tape.roll(r, {-1}, {0});
    CHECK(std::equal(back.data().begin(), back.data().end(), x.data().begin()));

    Rng rng(9);
    auto g = gradcheck::random_tensor({3, 4}, rng);
    auto w = gradcheck::random_tensor({3, 4}, rng, 1.0, false);
    auto res = gradcheck::check_op(
        [&](Tape<double>& t) { return t.sum_all(t.mul(t.roll(g, {1, -2}, {0, 1}), w)); }, {g});
    CHECK(res.max_rel_err <= 1e-6);
}

TEST_CASE("gather_rows selects and scatter-adds") {
    Tape<double> tape;
    auto table = make<double>({3, 2}, {1, 2, 3, 4, 5, 6}, true);
    auto out = tape.gather_rows(table, {2, 0, 2});
    CHECK(out.shape() == std::vector<int64_t>({3, 2}));
    CHECK(out.data()[0] == 5);
    CHECK(out.data()[4] == 5);
    auto loss = tape.sum_all(out);
    tape.backward(loss);
    CHECK(table.grad()[0] == 1);  // row 0 used once
    CHECK(table.grad()[2] == 0);  // row 1 unused
    CHECK(table.grad()[4] == 2);  // row 2 used twice
}

TEST_CASE("mean examples") {
    Tape<double> tape;
    auto x = make<double>({2}, {2, 4}, true);
    auto m = tape.mean_all(x);
    CHECK(m.item() == doctest::Approx(3.0).epsilon(1e-15));
    tape.backward(m);
    CHECK(x.grad()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(x.grad()[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("sum_axis and mean_axis reduce correctly") {
    Tape<double> tape(false);
    auto x = make<double>({2, 3}, {1, 2, 3, 4, 5, 6});
    auto s0 = tape.sum_axis(x, 0);
    CHECK(s0.shape() == std::vector<int64_t>({3}));
    CHECK(s0.data()[0] == 5);
    CHECK(s0.data()[2] == 9);
    auto m1 = tape.mean_axis(x, 1);
    CHECK(m1.data()[0] == doctest::Approx(2.0));
    CHECK(m1.data()[1] == doctest::Approx(5.0));
}

TEST_CASE("backward basics: sum and elementwise square") {
    {
        Tape<double> tape;
        auto w = make<double>({3}, {1, -2, 5}, true);
        auto loss = tape.sum_all(w);
        tape.backward(loss);
        for (int i = 0; i < 3; ++i) CHECK(w.grad()[i] == 1.0);
    }
    {
        Tape<double> tape;
        auto w = make<double>({3}, {1, -2, 5}, true);
        auto loss = tape.sum_all(tape.mul(w, w));
        tape.backward(loss);
        for (int i = 0; i < 3; ++i)
            CHECK(w.grad()[i] == doctest::Approx(2.0 * w.data()[i]).epsilon(1e-15));
    }
}

TEST_CASE("backward contract: scalar only, runs once per tape") {
    Tape<double> tape;
    auto w = make<double>({2}, {1, 2}, true);
    auto y = tape.mul(w, w);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
    auto loss = tape.sum_all(y);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), ContractError);
}

TEST_CASE("gradients accumulate when a tensor is used twice") {
    Tape<double> tape;
    auto w = make<double>({2}, {3, 4}, true);
    auto loss = tape.sum_all(tape.add(w, w));
    tape.backward(loss);
    CHECK(w.grad()[0] == 2.0);
    CHECK(w.grad()[1] == 2.0);
}

TEST_CASE("grads of tensors not reachable from the loss stay zero") {
    Tape<double> tape;
    auto w = make<double>({2}, {1, 2}, true);
    auto u = make<double>({2}, {5, 6}, true);
    auto side = tape.mul(u, u);  // recorded but not part of the loss
    (void)side;
    auto loss = tape.sum_all(w);
    tape.backward(loss);
    CHECK(u.grad()[0] == 0.0);
    CHECK(u.grad()[1] == 0.0);
}

TEST_CASE("non-finite results raise immediately") {
    Tape<double> tape(false);
    auto x = make<double>({1}, {1e308});
    CHECK_THROWS_AS(tape.scale(x, 1e10), NumericError);
    CHECK_THROWS_AS(make<double>({1}, {std::numeric_limits<double>::infinity()}),
                    NumericError);
}

TEST_CASE("float engine runs the same ops") {
    Tape<float> tape;
    auto a = make<float>({2, 2}, {1, 2, 3, 4}, true);
    auto b = make<float>({2, 2}, {1, 0, 0, 1});
    auto loss = tape.mean_all(tape.matmul(a, b));
    tape.backward(loss);
    CHECK(loss.item() == doctest::Approx(2.5f));
    for (int i = 0; i < 4; ++i) CHECK(a.grad()[i] == doctest::Approx(0.25f));

    // softmax sums to one within single-precision tolerance
    std::vector<float> big(8);
    Rng rng(1);
    for (auto& v : big) v = static_cast<float>((rng.uniform() * 2 - 1) * 1e3);
    auto x = make<float>({2, 4}, big);
    auto y = tape.softmax(x, 1);
    for (int r = 0; r < 2; ++r) {
        float sum = 0;
        for (int c = 0; c < 4; ++c) sum += y.data()[r * 4 + c];
        CHECK(std::abs(sum - 1.0f) <= 1e-6f);
    }
}
