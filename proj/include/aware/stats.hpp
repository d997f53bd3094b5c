#pragma once

// Numerical kernel: special functions and the p-value producing tests used by
// the ledger, the exploration session and the simulation harness.
//
// Every function here is pure and reentrant.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aware::stats {

enum class TestKind {
  welch_t_one_sided,
  welch_t_two_sided,
  chi2_homogeneity,
  chi2_gof,
};

std::string_view to_string(TestKind kind);
TestKind test_kind_from_string(std::string_view name);

enum class Alternative {
  greater,    // H1: mean(a) > mean(b)
  two_sided,
};

struct TestResult {
  double statistic = 0.0;
  double df = 1.0;
  double p_value = 1.0;
  std::int64_t support = 0;
  TestKind kind = TestKind::chi2_gof;
  // Set when some expected cell count of a chi-squared test is below 5.
  bool low_expected_counts = false;

  bool operator==(const TestResult&) const = default;
};

struct Bin {
  std::string label;
  std::int64_t count = 0;

  bool operator==(const Bin&) const = default;
};

struct Histogram {
  std::vector<Bin> bins;

  std::int64_t total() const;
  std::vector<double> counts() const;
  std::vector<std::string> labels() const;

  bool operator==(const Histogram&) const = default;
};

/// Mean, unbiased variance and size of one sample. `n` is real so that the
/// flip-factor search can scale sample sizes continuously.
struct SampleSummary {
  double mean = 0.0;
  double variance = 0.0;
  double n = 0.0;

  bool operator==(const SampleSummary&) const = default;
};

SampleSummary summarize(std::span<const double> sample);

// --- special functions ------------------------------------------------------

/// ln Γ(x) for x > 0.
double ln_gamma(double x);

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double regularized_gamma_q(double a, double x);

/// Regularized incomplete beta I_x(a, b).
double regularized_beta(double x, double a, double b);

/// P(X >= x) for X ~ chi-squared(df). Requires x >= 0, df >= 1.
double chi2_sf(double x, double df);

/// P(T >= t) for T ~ Student t(df). Requires df >= 1.
double t_sf(double t, double df);

// --- tests ------------------------------------------------------------------

/// Welch unequal-variance t-test. Throws DegenerateInputError when either
/// sample has fewer than two points or both variances are zero.
TestResult welch_t_test(std::span<const double> a, std::span<const double> b,
                        Alternative alternative);
TestResult welch_t_test(const SampleSummary& a, const SampleSummary& b,
                        Alternative alternative);

/// Two-row contingency chi-squared test between two histograms over the same
/// bin labels (order may differ). Bins empty in both histograms are dropped
/// from the table before the degrees of freedom are counted.
TestResult chi2_homogeneity(const Histogram& a, const Histogram& b);
TestResult chi2_homogeneity_counts(std::span<const double> a,
                                   std::span<const double> b);

/// Goodness of fit of `observed` against the proportions of `reference`.
TestResult chi2_goodness_of_fit(const Histogram& observed,
                                const Histogram& reference);
/// `reference` holds nonnegative weights; only their proportions matter.
TestResult chi2_gof_counts(std::span<const double> observed,
                           std::span<const double> reference);

/// Clamp a probability that drifted past [0, 1] by rounding.
double clamp_probability(double p);

}  // namespace aware::stats
