#include "aware/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aware/errors.hpp"

namespace aware::baselines {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must be in (0, 1)");
}

void check_p_values(std::span<const double> p) {
  for (double v : p) {
    if (std::isnan(v) || v < 0.0 || v > 1.0) {
      throw DomainError("p-values must be in [0, 1]");
    }
  }
}

BatchDecision threshold_all(std::span<const double> p, double threshold) {
  BatchDecision d;
  d.rejected.reserve(p.size());
  d.threshold.assign(p.size(), threshold);
  for (double v : p) d.rejected.push_back(v <= threshold);
  return d;
}

}  // namespace

std::size_t BatchDecision::rejections() const {
  return static_cast<std::size_t>(std::count(rejected.begin(), rejected.end(), true));
}

BatchDecision pcer(std::span<const double> p_values, double alpha) {
  check_alpha(alpha);
  check_p_values(p_values);
  return threshold_all(p_values, alpha);
}

BatchDecision bonferroni(std::span<const double> p_values, double alpha) {
  check_alpha(alpha);
  if (p_values.empty()) throw DomainError("bonferroni needs at least one p-value");
  check_p_values(p_values);
  return threshold_all(p_values, alpha / static_cast<double>(p_values.size()));
}

BatchDecision streaming_bonferroni(std::span<const double> p_stream, double alpha) {
  check_alpha(alpha);
  check_p_values(p_stream);
  BatchDecision d;
  d.rejected.reserve(p_stream.size());
  d.threshold.reserve(p_stream.size());
  for (std::size_t i = 0; i < p_stream.size(); ++i) {
    // underflows to 0 past j ~ 1075, where nothing but p = 0 is rejected
    const double t = std::ldexp(alpha, -static_cast<int>(std::min<std::size_t>(i + 1, 2000)));
    d.threshold.push_back(t);
    d.rejected.push_back(p_stream[i] <= t);
  }
  return d;
}

BatchDecision benjamini_hochberg(std::span<const double> p_values, double alpha) {
  check_alpha(alpha);
  if (p_values.empty()) throw DomainError("benjamini_hochberg needs at least one p-value");
  check_p_values(p_values);
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::size_t k = 0;
  for (std::size_t rank = m; rank >= 1; --rank) {
    const double t = static_cast<double>(rank) / static_cast<double>(m) * alpha;
    if (p_values[order[rank - 1]] <= t) {
      k = rank;
      break;
    }
  }
  BatchDecision d;
  d.rejected.assign(m, false);
  d.threshold.assign(m, 0.0);
  const double applied =
      k > 0 ? static_cast<double>(k) / static_cast<double>(m) * alpha : alpha / m;
  for (std::size_t rank = 0; rank < m; ++rank) {
    d.threshold[order[rank]] = applied;
    if (rank < k) d.rejected[order[rank]] = true;
  }
  return d;
}

std::size_t forward_stop_cutoff(std::span<const double> p_stream, double alpha) {
  check_alpha(alpha);
  check_p_values(p_stream);
  constexpr double kMaxP = 1.0 - 1e-16;
  double sum = 0.0;
  std::size_t cutoff = 0;
  for (std::size_t k = 1; k <= p_stream.size(); ++k) {
    const double p = std::min(p_stream[k - 1], kMaxP);
    sum += -std::log1p(-p);
    if (sum / static_cast<double>(k) <= alpha) cutoff = k;
  }
  return cutoff;
}

BatchDecision forward_stop(std::span<const double> p_stream, double alpha) {
  const std::size_t k = forward_stop_cutoff(p_stream, alpha);
  BatchDecision d;
  d.rejected.assign(p_stream.size(), false);
  d.threshold.assign(p_stream.size(), alpha);
  std::fill_n(d.rejected.begin(), k, true);
  return d;
}

bool holdout_test(double p_explore, double p_validate, double alpha) {
  check_alpha(alpha);
  const double both[] = {p_explore, p_validate};
  check_p_values(both);
  return p_explore <= alpha && p_validate <= alpha;
}

double holdout_false_rejection(double alpha) {
  check_alpha(alpha);
  return alpha * alpha;
}

double holdout_family_error(double alpha, std::int64_t m) {
  return fwer_inflation(holdout_false_rejection(alpha), m);
}

double fwer_inflation(double alpha, std::int64_t k) {
  check_alpha(alpha);
  if (k < 1) throw DomainError("fwer_inflation needs k >= 1");
  // 1 - (1 - a)^k without cancellation for small a
  return -std::expm1(static_cast<double>(k) * std::log1p(-alpha));
}

}  // namespace aware::baselines
