#include <gtest/gtest.h>

#include <random>

#include "gradcheck.hpp"
#include "hydronet/diff/adam.hpp"
#include "hydronet/diff/tape.hpp"
#include "support.hpp"

using namespace hydronet;
using namespace hydronet::diff;
using testing_support::max_abs_diff;
using testing_support::naive_matmul;
using testing_support::random_tensor;

TEST(Tensor, ShapeChecks) {
  EXPECT_THROW(Tensor(2, 2, std::vector<double>{1, 2, 3}), Error);
  Tensor t(2, 3, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t(1, 2), 1.5);
  EXPECT_THROW(t.item(), Error);
  EXPECT_EQ(Tensor::scalar(4.0).item(), 4.0);
}

TEST(Kernels, MatchNaiveOracle) {
  std::mt19937_64 rng(1);
  for (std::size_t n : {1u, 3u, 17u})
    for (std::size_t k : {1u, 5u, 33u})
      for (std::size_t m : {1u, 4u, 9u}) {
        auto a = random_tensor(rng, n, k), b = random_tensor(rng, k, m);
        Tensor out(n, m);
        kernel::gemm_nn(a, b, out);
        EXPECT_LT(max_abs_diff(out, naive_matmul(a, b)), 1e-12);

        // a^T variants against explicit transposes.
        Tensor bt(m, k);
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < m; ++j) bt(j, i) = b(i, j);
        Tensor out_nt(n, m);
        kernel::gemm_nt(a, bt, out_nt);
        EXPECT_LT(max_abs_diff(out_nt, naive_matmul(a, b)), 1e-12);

        Tensor at(k, n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < k; ++j) at(j, i) = a(i, j);
        Tensor out_tn(n, m);
        kernel::gemm_tn(at, b, out_tn);
        EXPECT_LT(max_abs_diff(out_tn, naive_matmul(a, b)), 1e-12);
      }
}

TEST(Ops, ForwardValues) {
  Tape tape;
  auto a = tape.constant(Tensor(2, 2, std::vector<double>{1, -2, 3, -4}));
  auto b = tape.constant(Tensor(1, 2, std::vector<double>{10, 20}));
  EXPECT_EQ(add_rowwise(a, b).value(), Tensor(2, 2, std::vector<double>{11, 18, 13, 16}));
  EXPECT_EQ(abs_elem(a).value(), Tensor(2, 2, std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(concat_cols(a, a).value().cols(), 4u);
  EXPECT_EQ(sum(a).value().item(), -2.0);
  EXPECT_EQ(gather_rows(a, std::vector<std::size_t>{1, 1, 0}).value(),
            Tensor(3, 2, std::vector<double>{3, -4, 3, -4, 1, -2}));
  EXPECT_EQ(scatter_sum(a, std::vector<std::size_t>{2, 2}, 3).value(),
            Tensor(3, 2, std::vector<double>{0, 0, 0, 0, 4, -6}));
  EXPECT_DOUBLE_EQ(l1(a, tape.constant(Tensor(2, 2))).value().item(), 2.5);
}

TEST(Ops, SeluReferenceValues) {
  Tape tape;
  auto x = tape.constant(Tensor(3, 1, std::vector<double>{1.0, 0.0, -20.0}));
  auto y = selu(x).value();
  EXPECT_DOUBLE_EQ(y[0], 1.0507009873554805);
  EXPECT_EQ(y[1], 0.0);
  // lambda * alpha = 1.7580993408473766; the negative branch saturates there.
  EXPECT_NEAR(y[2], -1.7580993408473766 * (1.0 - std::exp(-20.0)), 1e-15);
}

TEST(Ops, KinkConventions) {
  Tape tape;
  auto x = tape.leaf(Tensor(2, 1, std::vector<double>{0.0, 0.0}));
  tape.backward(sum(abs_elem(x)));
  EXPECT_EQ(tape.grad(x)[0], 0.0);
  Tape t2;
  auto z = t2.leaf(Tensor::scalar(0.0));
  t2.backward(sum(selu(z)));
  EXPECT_DOUBLE_EQ(t2.grad(z)[0], SeluConstants::lambda);
}

TEST(Ops, ShapeAndIndexErrors) {
  Tape tape;
  auto a = tape.constant(Tensor(2, 3));
  auto b = tape.constant(Tensor(2, 2));
  EXPECT_THROW(matmul(a, b), Error);
  EXPECT_THROW(add(a, b), Error);
  EXPECT_THROW(concat_cols(a, tape.constant(Tensor(3, 1))), Error);
  EXPECT_THROW(gather_rows(a, std::vector<std::size_t>{5}), Error);
  EXPECT_THROW(scatter_sum(a, std::vector<std::size_t>{0}, 3), Error);
  EXPECT_THROW(scatter_sum(a, std::vector<std::size_t>{0, 9}, 3), Error);
  EXPECT_THROW(add_rowwise(a, tape.constant(Tensor(1, 2))), Error);
}

TEST(Tape, LossMustBeScalar) {
  Tape tape;
  auto a = tape.leaf(Tensor(2, 2, 1.0));
  try {
    tape.backward(a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonScalarLoss);
  }
}

TEST(Tape, NonFiniteValuesAreRejected) {
  Tape tape;
  auto a = tape.leaf(Tensor::scalar(1e308));
  try {
    mul_scalar(a, 10.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteValue);
  }
}

TEST(Tape, ConstantsGetNoGradient) {
  Tape tape;
  auto w = tape.leaf(Tensor(2, 1, 1.0));
  auto c = tape.constant(Tensor(1, 2, 3.0));
  tape.backward(sum(matmul(c, w)));
  EXPECT_EQ(tape.grad(w), Tensor(2, 1, 3.0));
  EXPECT_EQ(tape.grad(c), Tensor(1, 2, 0.0));
}

TEST(Tape, ScatterIsAdjointOfGather) {
  // <scatter(m), y> == <m, gather(y)> for the same index list.
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + trial % 5, e = 2 + trial % 9;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> idx(e);
    for (auto& i : idx) i = pick(rng);
    auto m = random_tensor(rng, e, 3), y = random_tensor(rng, n, 3);
    Tape tape;
    auto s = scatter_sum(tape.constant(m), idx, n).value();
    auto g = gather_rows(tape.constant(y), idx).value();
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) lhs += s[i] * y[i];
    for (std::size_t i = 0; i < g.size(); ++i) rhs += m[i] * g[i];
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(Tape, PrimitiveGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(99);
  for (const auto& c : gradcheck::primitive_cases()) {
    std::size_t checked = 0;
    double worst = 0.0;
    for (int point = 0; point < 100; ++point) {
      std::vector<Tensor> inputs;
      for (auto [r, cols] : c.shapes) inputs.push_back(random_tensor(rng, r, cols, -2.0, 2.0));
      auto res = gradcheck::check(c.fn, inputs, rng);
      worst = std::max(worst, res.worst);
      checked += res.checked;
    }
    EXPECT_LT(worst, 1e-6) << c.name;
    EXPECT_GT(checked, 0u) << c.name;
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor p(1, 3, std::vector<double>{0.0, 1.0, -1.0});
  std::vector<Tensor*> params{&p};
  AdamState st;
  AdamOptions opt;
  opt.lr = 0.01;
  adam_step(params, {Tensor(1, 3, std::vector<double>{2.0, -0.5, 1e-3})}, st, opt);
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  EXPECT_NEAR(p[0], -0.01, 1e-9);
  EXPECT_NEAR(p[1], 1.01, 1e-9);
  EXPECT_NEAR(p[2], -1.0 - 0.01 * 1e-3 / (1e-3 + 1e-8), 1e-15);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, MatchesScalarSimulation) {
  // f(w) = |w| from w = 1 with lr = 0.1, against a direct scalar recursion.
  Tensor p = Tensor::scalar(1.0);
  std::vector<Tensor*> params{&p};
  AdamState st;
  AdamOptions opt;
  opt.lr = 0.1;
  double w = 1.0, m = 0.0, v = 0.0;
  double prev = 1.0;
  bool oscillating = false;
  for (int t = 1; t <= 50; ++t) {
    const double g = w > 0 ? 1.0 : (w < 0 ? -1.0 : 0.0);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    w -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    adam_step(params, {Tensor::scalar(p[0] > 0 ? 1.0 : (p[0] < 0 ? -1.0 : 0.0))}, st, opt);
    ASSERT_NEAR(p[0], w, 1e-12);
    if (std::fabs(p[0]) > prev) oscillating = true;
    if (!oscillating) {
      EXPECT_LT(std::fabs(p[0]), prev);
    }
    prev = std::fabs(p[0]);
  }
  EXPECT_LT(std::fabs(p[0]), 0.2);
}

TEST(Adam, WeightDecayAndErrors) {
  Tensor p = Tensor::scalar(2.0);
  std::vector<Tensor*> params{&p};
  AdamState st;
  AdamOptions opt;
  opt.lr = 0.1;
  opt.weight_decay = 1.0;
  adam_step(params, {Tensor::scalar(0.0)}, st, opt);
  EXPECT_NEAR(p[0], 1.9, 1e-9);
  EXPECT_THROW(adam_step(params, {Tensor(2, 1)}, st, opt), Error);
  EXPECT_THROW(adam_step(params, {}, st, opt), Error);
}

TEST(Adam, ZeroLearningRateLeavesParameters) {
  std::mt19937_64 rng(2);
  auto p = random_tensor(rng, 3, 3);
  auto before = p;
  std::vector<Tensor*> params{&p};
  AdamState st;
  AdamOptions opt;
  opt.lr = 0.0;
  for (int i = 0; i < 10; ++i) adam_step(params, {random_tensor(rng, 3, 3)}, st, opt);
  EXPECT_EQ(p, before);
}
