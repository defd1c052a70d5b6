#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <coherencekit/engine.hpp>
#include <coherencekit/metrics.hpp>
#include <coherencekit/stats.hpp>
#include <coherencekit/synthetic.hpp>

using namespace coherencekit;

namespace {

// Two-sided exact tail by direct enumeration with exact integer binomials.
double enumerated_p(int b, int c) {
  const int n = b + c;
  const int k = std::min(b, c);
  std::vector<std::vector<unsigned long long>> pascal(static_cast<std::size_t>(n + 1));
  for (int i = 0; i <= n; ++i) {
    pascal[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(i + 1), 1ULL);
    for (int j = 1; j < i; ++j) {
      pascal[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          pascal[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)] +
          pascal[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j)];
    }
  }
  unsigned long long tail = 0;
  for (int i = 0; i <= k; ++i) tail += pascal[static_cast<std::size_t>(n)][static_cast<std::size_t>(i)];
  return std::min(1.0, 2.0 * static_cast<double>(tail) / std::ldexp(1.0, n));
}

std::vector<std::string> random_labels(std::mt19937_64& rng, std::size_t n, int alphabet) {
  std::uniform_int_distribution<int> pick(0, alphabet - 1);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("L" + std::to_string(pick(rng)));
  return out;
}

}  // namespace

TEST(Kappa, HandExample) {
  const auto r = cohen_kappa({"E", "E", "N", "N"}, {"E", "N", "N", "N"});
  EXPECT_EQ(r.observed, 0.75);
  EXPECT_EQ(r.expected, 0.5);
  EXPECT_EQ(r.kappa, 0.5);
  EXPECT_EQ(r.items, 4u);
  EXPECT_EQ((r.confusion.at({"E", "N"})), 1u);
  EXPECT_EQ((r.confusion.at({"N", "N"})), 2u);
}

TEST(Kappa, PerfectAgreement) {
  EXPECT_EQ(cohen_kappa({"a", "b", "c", "a"}, {"a", "b", "c", "a"}).kappa, 1.0);
  EXPECT_EQ(cohen_kappa({"x", "x", "x"}, {"x", "x", "x"}).kappa, 1.0);
}

TEST(Kappa, Errors) {
  EXPECT_THROW(cohen_kappa({"a"}, {"a", "b"}), Error);
  EXPECT_THROW(cohen_kappa({}, {}), Error);
}

TEST(Kappa, IndependentRandomIsNearZero) {
  std::mt19937_64 rng(2024);
  const auto a = random_labels(rng, 10000, 3);
  const auto b = random_labels(rng, 10000, 3);
  EXPECT_NEAR(cohen_kappa(a, b).kappa, 0.0, 0.05);
}

TEST(Kappa, SymmetricAndRelabelingInvariant) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    const int alphabet = 2 + static_cast<int>(rng() % 4);
    auto a = random_labels(rng, n, alphabet);
    auto b = a;
    for (auto& x : b) {
      if (rng() % 3 == 0) x = "L" + std::to_string(rng() % static_cast<unsigned>(alphabet));
    }
    const auto ab = cohen_kappa(a, b);
    const auto ba = cohen_kappa(b, a);
    EXPECT_NEAR(ab.kappa, ba.kappa, 1e-12);
    EXPECT_LE(ab.kappa, 1.0 + 1e-12);
    EXPECT_EQ(ab.kappa == 1.0, a == b);

    std::vector<int> perm(static_cast<std::size_t>(alphabet));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto relabel = [&](std::vector<std::string> v) {
      for (auto& x : v) x = "R" + std::to_string(perm[static_cast<std::size_t>(std::stoi(x.substr(1)))]);
      return v;
    };
    EXPECT_NEAR(cohen_kappa(relabel(a), relabel(b)).kappa, ab.kappa, 1e-12);
  }
}

TEST(McNemar, KnownValues) {
  EXPECT_EQ(mcnemar_exact(10, 0).p_value, 0.001953125);
  EXPECT_EQ(mcnemar_exact(5, 5).p_value, 1.0);
  EXPECT_LT(mcnemar_exact(68, 0).p_value, 1e-5);
  EXPECT_NEAR(mcnemar_exact(68, 0).p_value, std::ldexp(2.0, -68), 1e-30);
  const auto none = mcnemar_exact(0, 0);
  EXPECT_EQ(none.p_value, 1.0);
  EXPECT_TRUE(none.no_discordant);
  EXPECT_FALSE(mcnemar_exact(3, 1).no_discordant);
  EXPECT_THROW(mcnemar_exact(-1, 2), Error);
}

TEST(McNemar, MatchesEnumeration) {
  for (int n = 1; n <= 20; ++n) {
    for (int b = 0; b <= n; ++b) {
      const double expect = enumerated_p(b, n - b);
      EXPECT_NEAR(mcnemar_exact(b, n - b).p_value, expect, 1e-15) << b << "," << n - b;
    }
  }
}

TEST(McNemar, SymmetricAndMonotone) {
  for (int n = 1; n <= 200; n += 7) {
    double previous = 2.0;
    for (int b = n / 2 + n % 2; b <= n; ++b) {
      const double p = mcnemar_exact(b, n - b).p_value;
      EXPECT_EQ(p, mcnemar_exact(n - b, b).p_value);
      EXPECT_GT(p, 0.0);
      EXPECT_LE(p, 1.0);
      EXPECT_LE(p, previous);
      previous = p;
    }
  }
}

TEST(McNemar, LargeCountsStayFinite) {
  const double p = mcnemar_exact(1500, 1400).p_value;
  EXPECT_GT(p, 0.0);
  EXPECT_LT(p, 0.1);
  EXPECT_NEAR(mcnemar_exact(1000, 1000).p_value, 1.0, 1e-12);
  EXPECT_NEAR(binomial_half_cdf(1500, 3000), 0.5 + 0.5 * std::exp(std::lgamma(3001.0) - 2 * std::lgamma(1501.0) -
                                                                      3000 * std::log(2.0)),
              1e-9);
}

TEST(McNemar, ChiSquareVariant) {
  // (|10 - 0| - 1)^2 / 10 = 8.1 -> p = erfc(sqrt(8.1 / 2))
  EXPECT_NEAR(mcnemar_chi2(10, 0).p_value, std::erfc(std::sqrt(8.1 / 2.0)), 1e-12);
  EXPECT_EQ(mcnemar_chi2(4, 5).p_value, 1.0);
  EXPECT_TRUE(mcnemar_chi2(0, 0).no_discordant);
}

TEST(PairOutcomes, OracleAndAdversary) {
  const Dataset ds = synthetic::entailment(50, 3);
  const auto gold = derive_gold_index(ds);
  auto oracle = open_backend(parse_backend_spec("oracle"), &gold);
  const auto t = pair_outcomes(evaluate(ds, gold, collect_predictions(ds, *oracle), {}));
  EXPECT_EQ(t.n11, 50);
  EXPECT_EQ(t.b(), 0);
  EXPECT_EQ(t.c(), 0);

  const Dataset adv = synthetic::adversary_fixture();
  const auto agold = derive_gold_index(adv);
  auto backend = open_backend(parse_backend_spec("endpoint_adversary"), &agold);
  const auto a = pair_outcomes(evaluate(adv, agold, collect_predictions(adv, *backend), {}));
  EXPECT_EQ(a.n11, 10);
  EXPECT_EQ(a.n10, 10);
  EXPECT_EQ(a.n01, 0);
  EXPECT_EQ(a.n00, 0);
  EXPECT_EQ(mcnemar_exact(a).p_value, 0.001953125);
}

TEST(PairOutcomes, CoherentImpliesCorrect) {
  const Dataset ds = synthetic::choice(60, 8);
  const auto gold = derive_gold_index(ds);
  auto backend = open_backend(parse_backend_spec("uniform_random:1"));
  const auto preds = collect_predictions(ds, *backend);
  for (double rho : {0.0, 0.1, 0.5}) {
    const auto t = pair_outcomes(evaluate(ds, gold, preds, {rho, ConfidenceMode::literal_max}));
    EXPECT_EQ(t.n01, 0);
    EXPECT_EQ(t.n00 + t.n01 + t.n10 + t.n11, 60);
  }
}
