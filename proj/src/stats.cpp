#include "aware/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_map>

#include "aware/errors.hpp"

namespace aware::stats {

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIterations = 1'000'000;
constexpr double kProbabilitySlack = 1e-12;

// Lanczos coefficients for g = 7, n = 9.
constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};

double lanczos_ln_gamma(double x) {
  // valid for x >= 0.5
  const double z = x - 1.0;
  double sum = kLanczos[0];
  for (std::size_t i = 1; i < kLanczos.size(); ++i) {
    sum += kLanczos[i] / (z + static_cast<double>(i));
  }
  const double t = z + kLanczosG + 0.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t +
         std::log(sum);
}

double stirling_ln_gamma(double x) {
  // Asymptotic series; truncation error below 1e-14 for x >= 10.
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv *
      (1.0 / 12.0 +
       inv2 * (-1.0 / 360.0 +
               inv2 * (1.0 / 1260.0 +
                       inv2 * (-1.0 / 1680.0 +
                               inv2 * (1.0 / 1188.0 +
                                       inv2 * (-691.0 / 360360.0))))));
  return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi) +
         series;
}

// Series expansion of P(a, x); converges quickly for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int n = 0; n < kMaxIterations; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - ln_gamma(a));
}

// Continued fraction for Q(a, x) (modified Lentz); used for x >= a + 1.
double gamma_q_continued_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - ln_gamma(a)) * h;
}

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double x, double a, double b) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return h;
}

// I_x(a, b) with 1 - x supplied separately to avoid cancellation near x = 1.
double regularized_beta_split(double x, double one_minus_x, double a,
                              double b) {
  if (x <= 0.0) return 0.0;
  if (one_minus_x <= 0.0) return 1.0;
  const double log_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) +
                           a * std::log(x) + b * std::log(one_minus_x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(x, a, b) / a;
  }
  return 1.0 - front * beta_continued_fraction(one_minus_x, b, a) / b;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw DomainError(std::string(what) + " must be finite");
  }
}

}  // namespace

std::string_view to_string(TestKind kind) {
  switch (kind) {
    case TestKind::welch_t_one_sided:
      return "welch_t_one_sided";
    case TestKind::welch_t_two_sided:
      return "welch_t_two_sided";
    case TestKind::chi2_homogeneity:
      return "chi2_homogeneity";
    case TestKind::chi2_gof:
      return "chi2_gof";
  }
  return "unknown";
}

TestKind test_kind_from_string(std::string_view name) {
  for (auto k : {TestKind::welch_t_one_sided, TestKind::welch_t_two_sided,
                 TestKind::chi2_homogeneity, TestKind::chi2_gof}) {
    if (to_string(k) == name) return k;
  }
  throw SchemaError("unknown test kind: " + std::string(name));
}

std::int64_t Histogram::total() const {
  std::int64_t t = 0;
  for (const auto& b : bins) t += b.count;
  return t;
}

std::vector<double> Histogram::counts() const {
  std::vector<double> out;
  out.reserve(bins.size());
  for (const auto& b : bins) out.push_back(static_cast<double>(b.count));
  return out;
}

std::vector<std::string> Histogram::labels() const {
  std::vector<std::string> out;
  out.reserve(bins.size());
  for (const auto& b : bins) out.push_back(b.label);
  return out;
}

SampleSummary summarize(std::span<const double> sample) {
  SampleSummary s;
  s.n = static_cast<double>(sample.size());
  if (sample.empty()) return s;
  double mean = 0.0;
  double m2 = 0.0;
  double k = 0.0;
  for (double v : sample) {
    k += 1.0;
    const double delta = v - mean;
    mean += delta / k;
    m2 += delta * (v - mean);
  }
  s.mean = mean;
  s.variance = sample.size() > 1 ? m2 / (s.n - 1.0) : 0.0;
  return s;
}

double clamp_probability(double p) {
  if (std::isnan(p) || p < -kProbabilitySlack || p > 1.0 + kProbabilitySlack) {
    throw DomainError("probability out of range: " + std::to_string(p));
  }
  return std::clamp(p, 0.0, 1.0);
}

double ln_gamma(double x) {
  if (!std::isfinite(x) || x <= 0.0) {
    throw DomainError("ln_gamma requires a finite positive argument");
  }
  if (x < 0.5) {
    // Reflection: Γ(x)Γ(1-x) = π / sin(πx)
    return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) -
           lanczos_ln_gamma(1.0 - x);
  }
  if (x < 10.0) return lanczos_ln_gamma(x);
  return stirling_ln_gamma(x);
}

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) {
    throw DomainError("regularized_gamma_p requires a > 0, x >= 0");
  }
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_continued_fraction(a, x);
}

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) {
    throw DomainError("regularized_gamma_q requires a > 0, x >= 0");
  }
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_continued_fraction(a, x);
}

double regularized_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0 && x <= 1.0)) {
    throw DomainError("regularized_beta requires a, b > 0 and x in [0, 1]");
  }
  return regularized_beta_split(x, 1.0 - x, a, b);
}

double chi2_sf(double x, double df) {
  if (std::isnan(x) || x < 0.0) throw DomainError("chi2_sf requires x >= 0");
  if (!(df >= 1.0) || !std::isfinite(df)) {
    throw DomainError("chi2_sf requires df >= 1");
  }
  return clamp_probability(regularized_gamma_q(0.5 * df, 0.5 * x));
}

double t_sf(double t, double df) {
  if (std::isnan(t)) throw DomainError("t_sf requires a numeric statistic");
  if (!(df >= 1.0) || !std::isfinite(df)) {
    throw DomainError("t_sf requires df >= 1");
  }
  if (t == 0.0) return 0.5;
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  const double t2 = t * t;
  const double x = df / (df + t2);
  const double one_minus_x = t2 / (df + t2);
  // P(T >= |t|)
  const double tail =
      0.5 * regularized_beta_split(x, one_minus_x, 0.5 * df, 0.5);
  return clamp_probability(t > 0.0 ? tail : 1.0 - tail);
}

TestResult welch_t_test(std::span<const double> a, std::span<const double> b,
                        Alternative alternative) {
  if (a.size() < 2 || b.size() < 2) {
    throw DegenerateInputError("welch_t_test needs at least two points per sample");
  }
  for (double v : a) require_finite(v, "sample value");
  for (double v : b) require_finite(v, "sample value");
  return welch_t_test(summarize(a), summarize(b), alternative);
}

TestResult welch_t_test(const SampleSummary& a, const SampleSummary& b,
                        Alternative alternative) {
  if (!(a.n >= 2.0) || !(b.n >= 2.0)) {
    throw DegenerateInputError("welch_t_test needs at least two points per sample");
  }
  const double va = a.variance / a.n;
  const double vb = b.variance / b.n;
  const double se2 = va + vb;
  if (!(se2 > 0.0)) {
    throw DegenerateInputError("welch_t_test: both samples have zero variance");
  }
  TestResult r;
  r.statistic = (a.mean - b.mean) / std::sqrt(se2);
  // Welch-Satterthwaite; always >= min(na, nb) - 1 >= 1.
  const double denom = va * va / (a.n - 1.0) + vb * vb / (b.n - 1.0);
  r.df = std::max(1.0, se2 * se2 / denom);
  r.support = std::llround(a.n + b.n);
  if (alternative == Alternative::greater) {
    r.kind = TestKind::welch_t_one_sided;
    r.p_value = t_sf(r.statistic, r.df);
  } else {
    r.kind = TestKind::welch_t_two_sided;
    r.p_value = clamp_probability(std::min(1.0, 2.0 * t_sf(std::abs(r.statistic), r.df)));
  }
  return r;
}

TestResult chi2_homogeneity_counts(std::span<const double> a,
                                   std::span<const double> b) {
  if (a.size() != b.size()) throw SchemaError("chi2_homogeneity: bin count mismatch");
  if (a.size() < 2) throw SchemaError("chi2_homogeneity needs at least two bins");
  double ta = 0.0;
  double tb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] >= 0.0) || !(b[i] >= 0.0)) {
      throw DomainError("chi2_homogeneity: counts must be nonnegative");
    }
    ta += a[i];
    tb += b[i];
  }
  if (!(ta > 0.0) || !(tb > 0.0)) {
    throw DegenerateInputError("chi2_homogeneity: a histogram has zero total");
  }
  const double n = ta + tb;
  TestResult r;
  r.kind = TestKind::chi2_homogeneity;
  r.support = std::llround(n);
  double stat = 0.0;
  int used_columns = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double col = a[i] + b[i];
    if (col <= 0.0) continue;
    ++used_columns;
    const double ea = ta * col / n;
    const double eb = tb * col / n;
    if (ea < 5.0 || eb < 5.0) r.low_expected_counts = true;
    stat += (a[i] - ea) * (a[i] - ea) / ea + (b[i] - eb) * (b[i] - eb) / eb;
  }
  r.statistic = stat;
  r.df = std::max(1, used_columns - 1);
  r.p_value = chi2_sf(stat, r.df);
  return r;
}

namespace {

// Reorders `b`'s counts to follow `a`'s label order.
std::vector<double> aligned_counts(const Histogram& a, const Histogram& b,
                                   const char* what) {
  if (a.bins.size() != b.bins.size()) {
    throw SchemaError(std::string(what) + ": histograms have different bins");
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < b.bins.size(); ++i) {
    if (!index.emplace(b.bins[i].label, i).second) {
      throw SchemaError(std::string(what) + ": duplicate bin label " + b.bins[i].label);
    }
  }
  std::vector<double> out(a.bins.size());
  for (std::size_t i = 0; i < a.bins.size(); ++i) {
    auto it = index.find(a.bins[i].label);
    if (it == index.end()) {
      throw SchemaError(std::string(what) + ": bin label mismatch " + a.bins[i].label);
    }
    out[i] = static_cast<double>(b.bins[it->second].count);
  }
  return out;
}

}  // namespace

TestResult chi2_homogeneity(const Histogram& a, const Histogram& b) {
  const auto bc = aligned_counts(a, b, "chi2_homogeneity");
  const auto ac = a.counts();
  return chi2_homogeneity_counts(ac, bc);
}

TestResult chi2_gof_counts(std::span<const double> observed,
                           std::span<const double> reference) {
  if (observed.size() != reference.size()) {
    throw SchemaError("chi2_goodness_of_fit: bin count mismatch");
  }
  if (observed.size() < 2) {
    throw SchemaError("chi2_goodness_of_fit needs at least two bins");
  }
  double to = 0.0;
  double tr = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!(observed[i] >= 0.0) || !(reference[i] >= 0.0)) {
      throw DomainError("chi2_goodness_of_fit: counts must be nonnegative");
    }
    to += observed[i];
    tr += reference[i];
  }
  if (!(tr > 0.0)) {
    throw DegenerateInputError("chi2_goodness_of_fit: reference has zero total");
  }
  if (!(to > 0.0)) {
    throw DegenerateInputError("chi2_goodness_of_fit: observed has zero total");
  }
  TestResult r;
  r.kind = TestKind::chi2_gof;
  r.support = std::llround(to);
  double stat = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double expected = to * reference[i] / tr;
    if (expected <= 0.0) {
      if (observed[i] > 0.0) {
        throw DegenerateInputError(
            "chi2_goodness_of_fit: observed count in a bin with zero reference mass");
      }
      continue;
    }
    ++used;
    if (expected < 5.0) r.low_expected_counts = true;
    const double d = observed[i] - expected;
    stat += d * d / expected;
  }
  r.statistic = stat;
  r.df = std::max(1, used - 1);
  r.p_value = chi2_sf(stat, r.df);
  return r;
}

TestResult chi2_goodness_of_fit(const Histogram& observed,
                                const Histogram& reference) {
  const auto rc = aligned_counts(observed, reference, "chi2_goodness_of_fit");
  const auto oc = observed.counts();
  return chi2_gof_counts(oc, rc);
}

}  // namespace aware::stats
