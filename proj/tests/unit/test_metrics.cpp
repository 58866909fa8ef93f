#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "support.hpp"
#include "tpt/errors.hpp"
#include "tpt/metrics.hpp"

using namespace tpt;
using namespace tpt::metrics;

namespace {

// O(n^2) ranks: 1 + #smaller + (#equal - 1) / 2.
std::vector<double> quadratic_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0.0, equal = 0.0;
    for (double y : x) {
      if (y < x[i]) less += 1.0;
      if (y == x[i]) equal += 1.0;
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

double pearson(const std::vector<double>& p, const std::vector<double>& q) {
  double mp = 0.0, mq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    mp += p[i] / p.size();
    mq += q[i] / q.size();
  }
  double num = 0.0, sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    num += (p[i] - mp) * (q[i] - mq);
    sp += (p[i] - mp) * (p[i] - mp);
    sq += (q[i] - mq) * (q[i] - mq);
  }
  return num / std::sqrt(sp * sq);
}

std::vector<double> rounded(std::vector<double> v) {
  for (auto& x : v) x = std::round(x);
  return v;
}

}  // namespace

TEST(Spearman, IdentityAndReversal) {
  const std::vector<double> t = {3.0, 1.0, 4.0, 1.5, 9.0, 2.6};
  EXPECT_DOUBLE_EQ(spearman(t, t), 1.0);
  std::vector<double> rev(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) rev[i] = -t[i];
  EXPECT_DOUBLE_EQ(spearman(rev, t), -1.0);
}

TEST(Spearman, AverageRanksForTies) {
  EXPECT_EQ(average_ranks(std::vector<double>{10, 20, 20, 5}),
            (std::vector<double>{2.0, 3.5, 3.5, 1.0}));
}

TEST(Spearman, MatchesQuadraticOracle) {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 60;
    auto p = tpt::testing::random_values(n, rng, 0.0, 10.0);
    auto q = tpt::testing::random_values(n, rng, 0.0, 10.0);
    if (trial % 2) {  // ties
      p = rounded(p);
      q = rounded(q);
    }
    const auto rp = quadratic_ranks(p), rq = quadratic_ranks(q);
    if (std::all_of(rp.begin(), rp.end(), [&](double r) { return r == rp[0]; }) ||
        std::all_of(rq.begin(), rq.end(), [&](double r) { return r == rq[0]; })) {
      continue;
    }
    EXPECT_NEAR(spearman(p, q), pearson(rp, rq), 1e-9) << trial;
  }
}

TEST(Spearman, InvariantUnderIncreasingTransforms) {
  std::mt19937_64 rng(45);
  const auto p = tpt::testing::random_values(30, rng, 0.1, 5.0);
  const auto q = tpt::testing::random_values(30, rng, 0.1, 5.0);
  std::vector<double> tp;
  for (double x : p) tp.push_back(std::exp(3.0 * x) + 7.0);
  EXPECT_DOUBLE_EQ(spearman(tp, q), spearman(p, q));
}

TEST(Spearman, Errors) {
  EXPECT_THROW(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), ContractError);
  EXPECT_THROW(spearman(std::vector<double>{1}, std::vector<double>{1}), ContractError);
  EXPECT_THROW(spearman(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}), DomainError);
}

TEST(RelativeL2, ClosedFormsAndOracle) {
  const std::vector<double> t = {10, 20, 30};
  EXPECT_EQ(relative_l2(t, t, 0, 100), 0.0);
  EXPECT_DOUBLE_EQ(relative_l2(std::vector<double>{100}, std::vector<double>{0}, 0, 100), 1.0);
  std::mt19937_64 rng(46);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = tpt::testing::random_values(25, rng, 0.0, 100.0);
    const auto q = tpt::testing::random_values(25, rng, 0.0, 100.0);
    double ref = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double e = std::abs(p[i] - q[i]) / 100.0;
      ref += e * e / p.size();
    }
    EXPECT_NEAR(relative_l2(p, q, 0.0, 100.0), ref, 1e-12);
    std::vector<double> doubled(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) doubled[i] = q[i] + 2.0 * (p[i] - q[i]);
    EXPECT_NEAR(relative_l2(doubled, q, 0.0, 100.0), 4.0 * ref, 1e-12);
  }
}

TEST(RelativeL2, Errors) {
  const std::vector<double> t = {1, 2};
  EXPECT_THROW(relative_l2(t, t, 5, 5), ConfigError);
  EXPECT_THROW(relative_l2(t, t, 6, 5), ConfigError);
  EXPECT_THROW(relative_l2(std::vector<double>{}, std::vector<double>{}, 0, 1), ContractError);
}

TEST(Report, JsonRoundTripAndHistory) {
  auto r = make_report(std::vector<double>{1, 2, 4}, std::vector<double>{1, 3, 2}, 0.0, 10.0);
  r.split = "val";
  r.config_hash = "abc123";
  r.epoch = 3;
  EXPECT_EQ(r.count, 3u);
  const auto back = EvalReport::from_json(r.to_json());
  EXPECT_EQ(back.spearman, r.spearman);
  EXPECT_EQ(back.relative_l2, r.relative_l2);
  EXPECT_EQ(back.count, r.count);
  EXPECT_EQ(back.split, "val");
  EXPECT_EQ(back.config_hash, "abc123");
  EXPECT_EQ(back.epoch, 3);

  const auto path = std::filesystem::temp_directory_path() / "tpt_history_test.csv";
  std::filesystem::remove(path);
  append_history(path, r);
  append_history(path, r);
  std::ifstream is(path);
  std::size_t lines = 0;
  for (std::string line; std::getline(is, line);) ++lines;
  EXPECT_EQ(lines, 3u);
  std::filesystem::remove(path);
}
