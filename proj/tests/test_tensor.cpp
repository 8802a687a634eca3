#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "kt/rng.hpp"
#include "kt/tensor.hpp"

using namespace kt;

namespace {

TensorPtr random_tensor(rng::Stream& stream, std::vector<int> shape, bool requires_grad = true) {
    auto t = Tensor::zeros(std::move(shape), requires_grad);
    for (double& x : t->data) x = stream.uniform(-1.0, 1.0);
    return t;
}

// sum(x) as a 1x1 tensor, built from matmuls so it stays differentiable.
TensorPtr scalar_sum(Tape& tape, const TensorPtr& x) {
    auto left = Tensor::from({1, x->rows()}, std::vector<double>(x->rows(), 1.0));
    auto right = Tensor::from({x->cols(), 1}, std::vector<double>(x->cols(), 1.0));
    return tape.matmul(tape.matmul(left, x), right);
}

}  // namespace

TEST_CASE("matmul values, including transpose flags") {
    Tape tape;
    auto a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    auto b = Tensor::from({3, 2}, {7, 8, 9, 10, 11, 12});
    auto c = tape.matmul(a, b);
    CHECK(c->shape == std::vector<int>{2, 2});
    CHECK(c->data == std::vector<double>{58, 64, 139, 154});

    auto at = Tensor::from({3, 2}, {1, 4, 2, 5, 3, 6});  // a transposed
    CHECK(tape.matmul(at, b, true, false)->data == c->data);
    auto bt = Tensor::from({2, 3}, {7, 9, 11, 8, 10, 12});  // b transposed
    CHECK(tape.matmul(a, bt, false, true)->data == c->data);
    CHECK(tape.matmul(at, bt, true, true)->data == c->data);

    CHECK_THROWS_AS(tape.matmul(a, a), std::invalid_argument);
}

TEST_CASE("add broadcasts a rank-1 bias over rows") {
    Tape tape;
    auto a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    auto bias = Tensor::from({3}, {10, 20, 30});
    CHECK(tape.add(a, bias)->data == std::vector<double>{11, 22, 33, 14, 25, 36});
    auto same = Tensor::from({2, 3}, {1, 1, 1, 1, 1, 1});
    CHECK(tape.add(a, same)->data == std::vector<double>{2, 3, 4, 5, 6, 7});
    auto wrong = Tensor::from({2}, {1, 2});
    CHECK_THROWS_AS(tape.add(a, wrong), std::invalid_argument);
}

TEST_CASE("row_gather copies rows, zeroes index -1, rejects out-of-range") {
    Tape tape;
    auto a = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
    auto g = tape.row_gather(a, {2, -1, 0, 2});
    CHECK(g->shape == std::vector<int>{4, 2});
    CHECK(g->data == std::vector<double>{5, 6, 0, 0, 1, 2, 5, 6});
    CHECK_THROWS_AS(tape.row_gather(a, {3}), std::out_of_range);
    CHECK_THROWS_AS(tape.row_gather(a, {-2}), std::out_of_range);
}

TEST_CASE("duplicated gather rows accumulate gradient") {
    Tape tape;
    auto a = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
    auto g = tape.row_gather(a, {1, 1, -1});
    auto loss = scalar_sum(tape, g);
    tape.backward(loss);
    CHECK(a->grad == std::vector<double>{0, 0, 2, 2});
}

TEST_CASE("softmax_masked normalizes over permitted entries only") {
    Tape tape;
    auto logits = Tensor::from({2, 3}, {1.0, 2.0, 3.0, 5.0, 5.0, 5.0});
    BoolMatrix allowed(2, 3);
    allowed.set(0, 0, true);
    allowed.set(0, 2, true);
    // row 1 fully blocked
    auto w = tape.softmax_masked(logits, allowed);
    const double z = std::exp(1.0) + std::exp(3.0);
    CHECK(w->data[0] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-12));
    CHECK(w->data[1] == 0.0);
    CHECK(w->data[2] == doctest::Approx(std::exp(3.0) / z).epsilon(1e-12));
    CHECK(w->data[3] == 0.0);
    CHECK(w->data[4] == 0.0);
    CHECK(w->data[5] == 0.0);
}

TEST_CASE("bce_masked value and input checks") {
    Tape tape;
    auto probs = Tensor::from({2, 1}, {0.5, 0.9});
    const std::vector<double> labels{1.0, 0.0};
    SUBCASE("single position gives ln 2 at p = 0.5") {
        auto loss = tape.bce_masked(probs, labels, {1, 0});
        CHECK(loss->data[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    }
    SUBCASE("empty mask is an error") {
        CHECK_THROWS_AS(tape.bce_masked(probs, labels, {0, 0}), std::invalid_argument);
    }
    SUBCASE("size mismatch is an error") {
        CHECK_THROWS_AS(tape.bce_masked(probs, {1.0}, {1, 0}), std::invalid_argument);
    }
}

TEST_CASE("bce_masked clamps probabilities and zeroes their gradient") {
    Tape tape;
    auto probs = Tensor::from({2, 1}, {0.0, 0.4}, true);
    auto loss = tape.bce_masked(probs, {0.0, 1.0}, {1, 1});
    CHECK(std::isfinite(loss->data[0]));
    tape.backward(loss);
    CHECK(probs->grad[0] == 0.0);  // clamped at the floor: locally flat
    CHECK(probs->grad[1] != 0.0);
}

TEST_CASE("dropout is identity when off and rescales when on") {
    Tape tape;
    auto x = Tensor::from({4, 8}, std::vector<double>(32, 1.0));
    CHECK(tape.dropout(x, 0.5, false, 7)->data == x->data);
    CHECK(tape.dropout(x, 0.0, true, 7)->data == x->data);
    auto a = tape.dropout(x, 0.5, true, 7);
    auto b = tape.dropout(x, 0.5, true, 7);
    CHECK(a->data == b->data);  // same key, same mask
    for (double v : a->data) CHECK((v == 0.0 || v == doctest::Approx(2.0)));
    auto c = tape.dropout(x, 0.5, true, 8);
    CHECK(a->data != c->data);  // different key, different mask
}

TEST_CASE("backward demands a scalar and consumes the record") {
    Tape tape;
    auto a = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
    auto b = tape.scale(a, 2.0);
    CHECK_THROWS_AS(tape.backward(b), std::invalid_argument);
    auto loss = scalar_sum(tape, b);
    tape.backward(loss);
    CHECK(a->grad == std::vector<double>{2, 2, 2, 2});
    CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
}

TEST_CASE("gradcheck validates each primitive against central differences") {
    rng::Stream stream(4242);
    const double tol = 1e-6;

    SUBCASE("matmul, both transpose flags") {
        auto a = random_tensor(stream, {3, 4});
        auto b = random_tensor(stream, {4, 2});
        auto at = random_tensor(stream, {4, 3});
        auto bt = random_tensor(stream, {2, 4});
        CHECK(gradcheck([&](Tape& t) { return scalar_sum(t, t.matmul(a, b)); }, {a, b}, 1e-5) < tol);
        CHECK(gradcheck([&](Tape& t) { return scalar_sum(t, t.matmul(at, b, true, false)); },
                        {at, b}, 1e-5) < tol);
        CHECK(gradcheck([&](Tape& t) { return scalar_sum(t, t.matmul(a, bt, false, true)); },
                        {a, bt}, 1e-5) < tol);
        CHECK(gradcheck([&](Tape& t) { return scalar_sum(t, t.matmul(at, bt, true, true)); },
                        {at, bt}, 1e-5) < tol);
    }
    SUBCASE("add with bias broadcast, mul, scale") {
        auto a = random_tensor(stream, {3, 4});
        auto bias = random_tensor(stream, {4});
        auto b = random_tensor(stream, {3, 4});
        auto f = [&](Tape& t) {
            return scalar_sum(t, t.scale(t.mul(t.add(a, bias), b), 1.7));
        };
        CHECK(gradcheck(f, {a, bias, b}, 1e-5) < tol);
    }
    SUBCASE("concat along both axes") {
        auto a = random_tensor(stream, {2, 3});
        auto b = random_tensor(stream, {2, 2});
        auto c = random_tensor(stream, {1, 5});
        auto f = [&](Tape& t) {
            auto wide = t.concat({a, b}, 1);
            auto tall = t.concat({wide, c}, 0);
            return scalar_sum(t, t.sigmoid(tall));
        };
        CHECK(gradcheck(f, {a, b, c}, 1e-5) < tol);
    }
    SUBCASE("activations") {
        auto a = random_tensor(stream, {3, 3});
        auto f = [&](Tape& t) {
            return scalar_sum(t, t.tanh(t.sigmoid(t.relu(a))));
        };
        CHECK(gradcheck(f, {a}, 1e-5) < tol);
    }
    SUBCASE("row_gather with duplicates and -1") {
        auto a = random_tensor(stream, {4, 3});
        auto f = [&](Tape& t) {
            return scalar_sum(t, t.sigmoid(t.row_gather(a, {2, 2, -1, 0, 3})));
        };
        CHECK(gradcheck(f, {a}, 1e-5) < tol);
    }
    SUBCASE("softmax_masked with a fully blocked row") {
        auto logits = random_tensor(stream, {3, 4});
        auto values = random_tensor(stream, {4, 2});
        BoolMatrix allowed(3, 4);
        allowed.set(0, 0, true);
        allowed.set(0, 1, true);
        allowed.set(1, 1, true);
        allowed.set(1, 2, true);
        allowed.set(1, 3, true);
        // row 2 fully blocked
        auto f = [&](Tape& t) {
            return scalar_sum(t, t.matmul(t.softmax_masked(logits, allowed), values));
        };
        CHECK(gradcheck(f, {logits, values}, 1e-5) < tol);
    }
    SUBCASE("bce_masked end to end") {
        auto z = random_tensor(stream, {5, 1});
        const std::vector<double> labels{1, 0, 1, 1, 0};
        const std::vector<std::uint8_t> mask{1, 1, 0, 1, 1};
        auto f = [&](Tape& t) { return t.bce_masked(t.sigmoid(z), labels, mask); };
        CHECK(gradcheck(f, {z}, 1e-5) < tol);
    }
    SUBCASE("an LSTM-style cell composition") {
        auto x = random_tensor(stream, {2, 3});
        auto wx = random_tensor(stream, {3, 3});
        auto wh = random_tensor(stream, {3, 3});
        auto b = random_tensor(stream, {3});
        auto h0 = random_tensor(stream, {2, 3});
        auto f = [&](Tape& t) {
            auto i = t.sigmoid(t.add(t.add(t.matmul(x, wx), t.matmul(h0, wh)), b));
            auto g = t.tanh(t.add(t.matmul(x, wx), b));
            return scalar_sum(t, t.mul(i, g));
        };
        CHECK(gradcheck(f, {x, wx, wh, b, h0}, 1e-5) < tol);
    }
}

TEST_CASE("gradcheck rejects a non-finite objective") {
    auto a = Tensor::from({1, 1}, {2.0}, true);
    auto f = [&](Tape& t) {
        auto s = t.scale(a, 1e300);
        return t.mul(s, s);  // overflows to inf
    };
    CHECK_THROWS_AS(gradcheck(f, {a}, 1e-5), std::runtime_error);
}
