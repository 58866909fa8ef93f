#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support.hpp"
#include "tpt/errors.hpp"
#include "tpt/optim.hpp"

using namespace tpt;
using tpt::testing::Input;
using tpt::testing::max_grad_error;
using tpt::testing::random_input;
using tpt::testing::weighted_sum;

namespace {

constexpr double kOpTolerance = 1e-5;

// Ten shape draws per op: rows and cols in [1, 5].
std::vector<std::pair<std::size_t, std::size_t>> shapes_for(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> dim(1, 5);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (int i = 0; i < 10; ++i) out.emplace_back(dim(rng), dim(rng));
  return out;
}

// Keeps values at least `gap` away from `kink`.
Input away_from(Input in, double kink, double gap) {
  for (auto& v : in.values)
    if (std::abs(v - kink) < gap) v = kink + (v < kink ? -gap : gap);
  return in;
}

void expect_unary_grad(const std::function<ad::Tensor(const ad::Tensor&)>& op, std::uint64_t seed,
                       double lo = -1.0, double hi = 1.0,
                       std::function<Input(Input)> fix = [](Input in) { return in; }) {
  std::mt19937_64 rng(seed);
  for (auto [r, c] : shapes_for(seed)) {
    const auto in = fix(random_input({r, c}, rng, lo, hi));
    const double err = max_grad_error(
        [&](ad::Tape& t, const std::vector<ad::Tensor>& x) { return weighted_sum(t, op(x[0])); },
        {in});
    EXPECT_LT(err, kOpTolerance) << "shape " << r << "x" << c;
  }
}

}  // namespace

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  ad::Tape t;
  const auto eye = t.constant({2, 2}, {1, 0, 0, 1});
  const auto m = t.constant({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(ad::matmul(eye, m).to_vector(), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Matmul, UnitSelector) {
  ad::Tape t;
  const auto y = ad::matmul(t.constant({1, 2}, {1, 0}), t.constant({2, 1}, {5, 7}));
  EXPECT_EQ(y.shape(), (ad::Shape{1, 1}));
  EXPECT_EQ(y.item(), 5.0);
}

TEST(Matmul, InnerDimensionMismatchNamesBothShapes) {
  ad::Tape t;
  const auto a = t.constant({2, 3}, std::vector<double>(6, 1.0));
  const auto b = t.constant({2, 3}, std::vector<double>(6, 1.0));
  try {
    ad::matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
}

TEST(Matmul, SumGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  const double err = max_grad_error(
      [](ad::Tape&, const std::vector<ad::Tensor>& x) { return ad::sum(ad::matmul(x[0], x[1])); },
      {random_input({3, 4}, rng), random_input({4, 2}, rng)});
  EXPECT_LT(err, 1e-6);
}

TEST(Matmul, RandomShapesGradient) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> dim(1, 6);
  for (int i = 0; i < 10; ++i) {
    const std::size_t m = dim(rng), k = dim(rng), n = dim(rng);
    const double err = max_grad_error(
        [](ad::Tape& t, const std::vector<ad::Tensor>& x) {
          return weighted_sum(t, ad::matmul(x[0], x[1]));
        },
        {random_input({m, k}, rng), random_input({k, n}, rng)});
    EXPECT_LT(err, kOpTolerance);
  }
}

TEST(Softmax, ZerosGiveUniform) {
  ad::Tape t;
  const auto y = ad::softmax(t.constant({1, 3}, {0, 0, 0}), 1);
  for (double v : y.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, LargeLogitDoesNotOverflow) {
  ad::Tape t;
  const auto y = ad::softmax(t.constant({2}, {1000, 0}), 0);
  EXPECT_TRUE(std::isfinite(y.values()[0]));
  EXPECT_NEAR(y.values()[0], 1.0, 1e-15);
  EXPECT_GE(y.values()[1], 0.0);
  EXPECT_LT(y.values()[1], 1e-300);
}

TEST(Softmax, JacobianOfLengthEight) {
  std::mt19937_64 rng(8);
  for (std::size_t j = 0; j < 8; ++j) {
    const double err = max_grad_error(
        [j](ad::Tape&, const std::vector<ad::Tensor>& x) {
          return ad::slice(ad::softmax(x[0], 0), 0, j, j + 1);
        },
        {random_input({8}, rng, -3, 3)});
    EXPECT_LT(err, 1e-6) << "output " << j;
  }
}

TEST(Softmax, RowsSumToOneAndArePositive) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    ad::Tape t;
    const auto in = random_input({4, 7}, rng, -30, 30);
    const auto y = ad::softmax(t.constant(in.shape, in.values), 1);
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 7; ++c) {
        EXPECT_GT(y.at(r, c), 0.0);
        s += y.at(r, c);
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(Softmax, GradientAlongEitherAxis) {
  expect_unary_grad([](const ad::Tensor& x) { return ad::softmax(x, 1); }, 10, -2, 2);
  expect_unary_grad([](const ad::Tensor& x) { return ad::softmax(x, 0); }, 11, -2, 2);
}

TEST(Elementwise, Concat) {
  ad::Tape t;
  const auto y = ad::concat({t.constant({2}, {1, 2}), t.constant({1}, {3})}, 0);
  EXPECT_EQ(y.to_vector(), (std::vector<double>{1, 2, 3}));
}

TEST(Elementwise, LayerNormOfConstantIsZero) {
  ad::Tape t;
  const auto y = ad::layer_norm(t.constant({1, 4}, {3, 3, 3, 3}));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(Elementwise, LogRejectsNonPositive) {
  ad::Tape t;
  EXPECT_THROW(ad::log(t.constant({2}, {1.0, 0.0})), DomainError);
}

TEST(Elementwise, BroadcastMismatchThrows) {
  ad::Tape t;
  EXPECT_THROW(ad::add(t.constant({2, 3}, std::vector<double>(6)), t.constant({2}, {1, 2})),
               DimensionError);
}

TEST(OpGradients, Unary) {
  expect_unary_grad([](const ad::Tensor& x) { return ad::transpose(x); }, 20);
  expect_unary_grad([](const ad::Tensor& x) { return ad::scale(x, -2.5); }, 21);
  expect_unary_grad([](const ad::Tensor& x) { return ad::add_scalar(x, 0.7); }, 22);
  expect_unary_grad([](const ad::Tensor& x) { return ad::neg(x); }, 23);
  expect_unary_grad([](const ad::Tensor& x) { return ad::exp(x); }, 24);
  expect_unary_grad([](const ad::Tensor& x) { return ad::log(x); }, 25, 0.2, 3.0);
  expect_unary_grad([](const ad::Tensor& x) { return ad::square(x); }, 26);
  expect_unary_grad([](const ad::Tensor& x) { return ad::sigmoid(x); }, 27, -4, 4);
  expect_unary_grad([](const ad::Tensor& x) { return ad::abs_smooth(x); }, 28, -1, 1,
                    [](Input in) { return away_from(std::move(in), 0.0, 1e-2); });
  expect_unary_grad([](const ad::Tensor& x) { return ad::relu(x); }, 29, -1, 1,
                    [](Input in) { return away_from(std::move(in), 0.0, 1e-2); });
  expect_unary_grad([](const ad::Tensor& x) { return ad::clamp(x, -0.5, 0.5); }, 30, -1, 1,
                    [](Input in) {
                      return away_from(away_from(std::move(in), -0.5, 1e-2), 0.5, 1e-2);
                    });
  expect_unary_grad([](const ad::Tensor& x) { return ad::layer_norm(x); }, 31, -2, 2);
}

TEST(OpGradients, Reductions) {
  expect_unary_grad([](const ad::Tensor& x) { return ad::sum(x); }, 40);
  expect_unary_grad([](const ad::Tensor& x) { return ad::mean(x); }, 41);
  expect_unary_grad([](const ad::Tensor& x) { return ad::sum(x, 0); }, 42);
  expect_unary_grad([](const ad::Tensor& x) { return ad::sum(x, 1); }, 43);
  expect_unary_grad([](const ad::Tensor& x) { return ad::mean(x, 0); }, 44);
  expect_unary_grad([](const ad::Tensor& x) { return ad::mean(x, 1); }, 45);
}

TEST(OpGradients, ShapeOps) {
  expect_unary_grad([](const ad::Tensor& x) { return ad::reshape(x, {x.size()}); }, 50);
  expect_unary_grad([](const ad::Tensor& x) { return ad::slice(x, 0, 0, 1); }, 51);
  expect_unary_grad([](const ad::Tensor& x) { return ad::slice(x, 1, x.cols() - 1, x.cols()); },
                    52);
  expect_unary_grad([](const ad::Tensor& x) { return ad::concat({x, ad::square(x)}, 0); }, 53);
  expect_unary_grad([](const ad::Tensor& x) { return ad::concat({ad::exp(x), x}, 1); }, 54);
}

TEST(OpGradients, BroadcastingBinary) {
  std::mt19937_64 rng(60);
  for (auto [r, c] : shapes_for(60)) {
    for (int op = 0; op < 3; ++op) {
      const auto f = [op](ad::Tape& t, const std::vector<ad::Tensor>& x) {
        ad::Tensor y = op == 0 ? x[0] + x[1] : op == 1 ? x[0] - x[1] : x[0] * x[1];
        y = op == 0 ? x[1] + y : op == 1 ? x[2] - y : y * x[2];
        return weighted_sum(t, y);
      };
      // Full, row-vector and scalar-like operands.
      const double err = max_grad_error(
          f, {random_input({r, c}, rng), random_input({c}, rng), random_input({r, 1}, rng)});
      EXPECT_LT(err, kOpTolerance) << "op " << op << " shape " << r << "x" << c;
    }
  }
}

TEST(OpGradients, DetachBlocksGradient) {
  ad::Tape t;
  const auto x = t.variable({3}, {1, 2, 3});
  const auto y = ad::sum(ad::detach(x) * x);
  t.backward(y);
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()),
            (std::vector<double>{1, 2, 3}));
}

TEST(Backward, SumOfParameterGivesOnes) {
  ad::Parameter p("p", {2, 3}, std::vector<double>(6, 0.5), "g");
  ad::Tape t;
  t.backward(ad::sum(t.param(p)));
  for (double g : p.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, ZeroTimesParameterGivesZero) {
  ad::Parameter p("p", {4}, {1, 2, 3, 4}, "g");
  ad::Tape t;
  t.backward(ad::sum(ad::scale(t.param(p), 0.0)));
  for (double g : p.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, ParameterImportedOnceAccumulatesAllUses) {
  ad::Parameter p("p", {1}, {3.0}, "g");
  ad::Tape t;
  const auto a = t.param(p);
  const auto b = t.param(p);
  EXPECT_EQ(a.id(), b.id());
  t.backward(ad::sum(a * b));
  EXPECT_DOUBLE_EQ(p.grad()[0], 6.0);
}

TEST(Backward, RepeatedBackwardAccumulatesIntoParameters) {
  ad::Parameter p("p", {1}, {2.0}, "g");
  ad::Tape t;
  const auto y = ad::sum(ad::square(t.param(p)));
  t.backward(y);
  t.backward(y);
  EXPECT_DOUBLE_EQ(p.grad()[0], 8.0);
  p.zero_grad();
  EXPECT_EQ(p.grad()[0], 0.0);
}

TEST(Backward, NonFiniteGradientRaises) {
  ad::Parameter p("p", {1}, {1e200}, "g");
  ad::Tape t;
  EXPECT_THROW(t.backward(ad::sum(ad::square(ad::square(t.param(p))))), NumericError);
}

TEST(Backward, ReplayIsBitIdentical) {
  const auto run = [] {
    std::mt19937_64 rng(77);
    ad::Tape t;
    const auto in = random_input({5, 6}, rng);
    const auto x = t.variable(in.shape, in.values);
    const auto y = ad::sum(ad::softmax(ad::matmul(x, ad::transpose(x)), 1) * ad::exp(ad::scale(
                                                                             ad::sum(x, 1), 0.1)));
    t.backward(y);
    return std::pair{y.item(), std::vector<double>(x.grad().begin(), x.grad().end())};
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(ParameterStore, DuplicateNameRejected) {
  ad::ParameterStore s;
  s.add("w", {1}, {0.0}, "g");
  EXPECT_THROW(s.add("w", {1}, {0.0}, "g"), ConfigError);
  EXPECT_EQ(s.size(), 1u);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  std::vector<double> x{1.0, -2.0, 3.0};
  const std::vector<double> g(3, 0.0);
  optim::AdamState st;
  for (int i = 0; i < 5; ++i) optim::adam_step(x, g, st, {});
  EXPECT_EQ(x, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Adam, OneStepDescendsOnSquare) {
  std::vector<double> x{1.0};
  optim::AdamState st;
  optim::adam_step(x, std::vector<double>{2.0 * x[0]}, st, {0.1});
  EXPECT_LT(x[0], 1.0);
  EXPECT_NEAR(x[0], 0.9, 1e-6);
}

TEST(Adam, ConvergesOnFiveDimQuadratic) {
  // f(x) = sum_i c_i (x_i - 0)^2 with varied curvature.
  const std::vector<double> c{1.0, 2.0, 0.5, 4.0, 1.5};
  std::vector<double> x{1.0, -2.0, 0.5, 3.0, -1.0};
  optim::AdamState st;
  const optim::AdamHyper hyper{0.05};
  for (int step = 0; step < 500; ++step) {
    std::vector<double> g(5);
    for (int i = 0; i < 5; ++i) g[i] = 2.0 * c[i] * x[i];
    optim::adam_step(x, g, st, hyper);
  }
  const double norm = std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
  EXPECT_LT(norm, 1e-3);
}

TEST(Adam, GroupsUseTheirOwnLearningRate) {
  ad::ParameterStore store;
  auto& a = store.add("a", {1}, {1.0}, "backbone");
  auto& b = store.add("b", {1}, {1.0}, "head");
  optim::Adam adam(store, {1e-4}, {{"backbone", 1e-4}, {"head", 1e-3}});
  a.grad()[0] = 1.0;
  b.grad()[0] = 1.0;
  adam.step();
  // The first bias-corrected Adam step moves each value by about its lr.
  EXPECT_NEAR(1.0 - a.values()[0], 1e-4, 1e-9);
  EXPECT_NEAR(1.0 - b.values()[0], 1e-3, 1e-8);
  EXPECT_DOUBLE_EQ(adam.lr_for("head"), 1e-3);
}

TEST(Adam, FrozenParametersAreSkipped) {
  ad::ParameterStore store;
  auto& a = store.add("a", {1}, {1.0}, "backbone");
  a.set_trainable(false);
  optim::Adam adam(store, {0.1}, {});
  a.grad()[0] = 1.0;
  adam.step();
  EXPECT_EQ(a.values()[0], 1.0);
}
