#pragma once

// Static and sequential comparison procedures.

#include <cstdint>
#include <span>
#include <vector>

namespace aware::baselines {

struct BatchDecision {
  std::vector<bool> rejected;
  std::vector<double> threshold;  // per-hypothesis threshold actually applied

  std::size_t rejections() const;
};

/// No correction: reject where p <= alpha.
BatchDecision pcer(std::span<const double> p_values, double alpha);

/// Reject where p <= alpha / m. Throws DomainError on empty input.
BatchDecision bonferroni(std::span<const double> p_values, double alpha);

/// The j-th (1-based) hypothesis is rejected iff p_j <= alpha * 2^-j.
BatchDecision streaming_bonferroni(std::span<const double> p_stream, double alpha);

/// Step-up procedure: reject the k smallest p-values for the largest k with
/// p_(k) <= k alpha / m. Ties are ordered by input index. Output keeps input
/// order. Throws DomainError on empty input.
BatchDecision benjamini_hochberg(std::span<const double> p_values, double alpha);

/// Ordered-testing FDR rule: reject 1..k for the largest k whose running mean
/// of -ln(1 - p_i) is at most alpha.
BatchDecision forward_stop(std::span<const double> p_stream, double alpha);

/// Number of leading hypotheses forward_stop rejects.
std::size_t forward_stop_cutoff(std::span<const double> p_stream, double alpha);

/// Split-sample validation: reject iff both halves reject at alpha.
bool holdout_test(double p_explore, double p_validate, double alpha);

/// False-rejection probability of holdout_test for one true null: alpha^2.
double holdout_false_rejection(double alpha);

/// Probability of at least one false rejection over `m` independent true
/// nulls under holdout_test: 1 - (1 - alpha^2)^m.
double holdout_family_error(double alpha, std::int64_t m);

/// Chance of at least one false discovery over k independent tests at
/// level alpha: 1 - (1 - alpha)^k.
double fwer_inflation(double alpha, std::int64_t k);

}  // namespace aware::baselines
