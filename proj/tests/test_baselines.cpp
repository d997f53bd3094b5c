#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "aware/baselines.hpp"
#include "aware/errors.hpp"
#include "oracles.hpp"

using namespace aware;
using namespace aware::baselines;

namespace {

using Flags = std::vector<bool>;

std::vector<double> uniforms(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& x : out) x = u(rng);
  return out;
}

}  // namespace

TEST(Pcer, Examples) {
  EXPECT_EQ(pcer(std::vector<double>{0.01, 0.04, 0.06}, 0.05).rejected, (Flags{true, true, false}));
  EXPECT_TRUE(pcer(std::vector<double>{}, 0.05).rejected.empty());
}

TEST(Pcer, ExpectedRejectionsUnderNull) {
  std::mt19937_64 rng(1);
  double total = 0.0;
  const int reps = 4000;
  for (int i = 0; i < reps; ++i) total += pcer(uniforms(rng, 64), 0.05).rejections();
  // mean of 64 Bernoulli(0.05): sd per run 1.74, SE 0.028
  EXPECT_NEAR(total / reps, 3.2, 0.1);
}

TEST(Pcer, DomainErrors) {
  EXPECT_THROW(pcer(std::vector<double>{0.5, 1.2}, 0.05), DomainError);
}

TEST(Bonferroni, Examples) {
  auto d = bonferroni(std::vector<double>{0.004, 0.006}, 0.05);
  EXPECT_EQ(d.rejected, (Flags{true, true}));
  EXPECT_NEAR(d.threshold[0], 0.025, 1e-15);
  EXPECT_EQ(bonferroni(std::vector<double>{0.01}, 0.05).rejected, Flags{true});
  d = bonferroni(std::vector<double>{0.004, 0.03, 0.2, 0.5, 0.9}, 0.05);
  EXPECT_EQ(d.rejected, (Flags{true, false, false, false, false}));
  EXPECT_NEAR(d.threshold[0], 0.01, 1e-15);
  EXPECT_THROW(bonferroni(std::vector<double>{}, 0.05), DomainError);
}

TEST(StreamingBonferroni, Examples) {
  EXPECT_TRUE(streaming_bonferroni(std::vector<double>{0.02}, 0.05).rejected[0]);
  const auto d = streaming_bonferroni(std::vector<double>{1, 1, 1, 1, 0.002}, 0.05);
  EXPECT_FALSE(d.rejected[4]);
  EXPECT_NEAR(d.threshold[4], 0.0015625, 1e-15);
}

TEST(StreamingBonferroni, SpendsLessThanAlpha) {
  for (std::size_t n : {1u, 10u, 100u, 5000u}) {
    const auto d = streaming_bonferroni(std::vector<double>(n, 0.5), 0.05);
    double spent = 0.0;
    for (double t : d.threshold) spent += t;
    // alpha * (1 - 2^-n) rounds to alpha once 2^-n drops below double precision
    if (n <= 50) EXPECT_LT(spent, 0.05);
    EXPECT_LE(spent, 0.05);
  }
}

TEST(BenjaminiHochberg, Examples) {
  const std::vector<double> p = {0.01, 0.02, 0.04, 0.2};
  EXPECT_EQ(benjamini_hochberg(p, 0.05).rejected, (Flags{true, true, false, false}));
  EXPECT_EQ(oracle::brute_force_bh(p, 0.05), (Flags{true, true, false, false}));
  EXPECT_EQ(benjamini_hochberg(std::vector<double>(5, 0.0), 0.05).rejected, Flags(5, true));
  EXPECT_EQ(benjamini_hochberg(std::vector<double>(5, 1.0), 0.05).rejected, Flags(5, false));
  EXPECT_THROW(benjamini_hochberg(std::vector<double>{}, 0.05), DomainError);
}

TEST(BenjaminiHochberg, KeepsInputOrder) {
  const std::vector<double> p = {0.2, 0.02, 0.04, 0.01};
  EXPECT_EQ(benjamini_hochberg(p, 0.05).rejected, (Flags{false, true, false, true}));
}

TEST(BenjaminiHochberg, MatchesBruteForce) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> size(1, 12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> p(size(rng));
    for (auto& x : p) {
      // many ties and small values
      x = u(rng) < 0.5 ? std::round(u(rng) * 20.0) / 400.0 : u(rng);
    }
    EXPECT_EQ(benjamini_hochberg(p, 0.05).rejected, oracle::brute_force_bh(p, 0.05));
  }
}

TEST(Nesting, BonferroniInsideBhInsidePcer) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> p(1 + i % 40);
    for (auto& x : p) x = std::pow(u(rng), 1.0 + (i % 5));
    const auto b = bonferroni(p, 0.05).rejected;
    const auto h = benjamini_hochberg(p, 0.05).rejected;
    const auto c = pcer(p, 0.05).rejected;
    for (std::size_t k = 0; k < p.size(); ++k) {
      EXPECT_LE(b[k], h[k]);
      EXPECT_LE(h[k], c[k]);
    }
  }
}

TEST(WeakFwer, BonferroniAndBhUnderCompleteNull) {
  std::mt19937_64 rng(10);
  const int reps = 4000;
  double bonf = 0.0, bh = 0.0;
  for (int i = 0; i < reps; ++i) {
    const auto p = uniforms(rng, 20);
    bonf += bonferroni(p, 0.05).rejections() > 0;
    bh += benjamini_hochberg(p, 0.05).rejections() > 0;
  }
  const double se = std::sqrt(0.05 * 0.95 / reps);
  EXPECT_LE(bonf / reps, 0.05 + 3 * se);
  EXPECT_LE(bh / reps, 0.05 + 3 * se);
}

TEST(ForwardStop, Examples) {
  const std::vector<double> p = {0.001, 0.01, 0.3};
  EXPECT_EQ(forward_stop_cutoff(p, 0.05), 2u);
  EXPECT_EQ(forward_stop(p, 0.05).rejected, (Flags{true, true, false}));
  // running means of -ln(1 - p)
  double sum = 0.0;
  std::vector<double> means;
  for (std::size_t k = 0; k < p.size(); ++k) {
    sum += -std::log(1.0 - p[k]);
    means.push_back(sum / (k + 1.0));
  }
  EXPECT_NEAR(means[0], 0.0010, 1e-4);
  EXPECT_NEAR(means[1], 0.0055, 1e-4);
  EXPECT_NEAR(means[2], 0.1226, 1e-4);
  EXPECT_EQ(forward_stop(std::vector<double>(6, 0.0), 0.05).rejected, Flags(6, true));
}

TEST(ForwardStop, EarlyLargePValueBlocksEverything) {
  const std::vector<double> p = {0.9, 0.001, 0.001, 0.002, 0.0001, 0.003};
  EXPECT_EQ(forward_stop_cutoff(p, 0.05), 0u);
}

TEST(ForwardStop, HandlesPOfOne) {
  EXPECT_NO_THROW(forward_stop(std::vector<double>{1.0, 0.0}, 0.05));
  EXPECT_EQ(forward_stop_cutoff(std::vector<double>{1.0, 0.0}, 0.05), 0u);
}

TEST(ForwardStop, PrefixShaped) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> p(30);
    for (auto& x : p) x = std::pow(u(rng), 4.0);
    const auto r = forward_stop(p, 0.1).rejected;
    const auto k = forward_stop_cutoff(p, 0.1);
    for (std::size_t j = 0; j < p.size(); ++j) EXPECT_EQ(r[j], j < k);
  }
}

TEST(Holdout, Examples) {
  EXPECT_TRUE(holdout_test(0.04, 0.03, 0.05));
  EXPECT_FALSE(holdout_test(0.04, 0.06, 0.05));
  EXPECT_NEAR(holdout_false_rejection(0.05), 0.0025, 1e-12);
  EXPECT_NEAR(holdout_family_error(0.05, 25), 1.0 - std::pow(1.0 - 0.0025, 25), 1e-14);
  EXPECT_NEAR(holdout_family_error(0.05, 25), 0.0607, 1e-4);
}

TEST(Holdout, FalseRejectionMatchesSimulation) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int reps = 200000;
  int hits = 0;
  for (int i = 0; i < reps; ++i) hits += holdout_test(u(rng), u(rng), 0.05);
  EXPECT_NEAR(static_cast<double>(hits) / reps, 0.0025, 4 * std::sqrt(0.0025 / reps));
}

TEST(FwerInflation, Examples) {
  EXPECT_NEAR(fwer_inflation(0.05, 2), 0.0975, 1e-12);
  EXPECT_NEAR(fwer_inflation(0.05, 4), 0.18549375, 1e-12);
  for (double a : {0.01, 0.05, 0.3}) EXPECT_NEAR(fwer_inflation(a, 1), a, 1e-15);
}
