#pragma once

// Monte Carlo harness: synthetic hypothesis streams, procedure comparison,
// workflow replay.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aware/dataset.hpp"
#include "aware/ledger.hpp"

namespace aware::sim {

enum class ProcedureKind {
  pcer,
  bonferroni,
  benjamini_hochberg,
  forward_stop,
  streaming_bonferroni,
  investing,
};

struct ProcedureSpec {
  ProcedureKind kind = ProcedureKind::pcer;
  ledger::PolicyConfig policy;  // investing only
  std::string label;

  /// Sees the whole batch at once (pcer, bonferroni, benjamini_hochberg).
  bool is_static() const;
};

/// "pcer", "bonferroni", "bh" | "benjamini_hochberg", "forward_stop",
/// "streaming_bonferroni", or a policy spec such as "hybrid:epsilon=0.5".
ProcedureSpec parse_procedure(std::string_view spec);

/// Rejection flags in input order. `eta` is the initial wealth factor of the
/// investing rules; `support` may be empty when no rule needs it.
std::vector<bool> run_procedure(const ProcedureSpec& procedure,
                                std::span<const double> p_values,
                                std::span<const double> support, double alpha,
                                double eta);

struct ExperimentConfig {
  std::int64_t m = 64;
  double null_proportion = 0.75;
  std::int64_t n_per_group = 10;
  double effect_lo = 1.25;
  double effect_hi = 5.0;
  double sample_fraction = 1.0;
  std::int64_t repetitions = 1000;
  std::uint64_t seed = 20170514;
  double alpha = 0.05;
  std::optional<double> eta;  // 1 - alpha when empty
  std::vector<ProcedureSpec> procedures;
  unsigned threads = 0;  // 0: hardware concurrency

  double effective_eta() const { return eta.value_or(1.0 - alpha); }
  std::int64_t group_size() const;
  /// Throws ConfigError.
  void validate() const;
};

/// Reads the keys m, null_prop, n_per_group, effect_lo, effect_hi,
/// sample_fraction, reps, seed, alpha, eta, procedures, threads.
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Independent generator for (seed, run_index, stream).
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t run_index,
                         std::uint64_t stream = 0);

struct Hypothesis {
  double p_value = 1.0;
  double support_fraction = 1.0;
  bool is_true_null = true;
};

std::vector<Hypothesis> gen_stream(const ExperimentConfig& config,
                                   std::uint64_t run_index);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
  double ci() const { return 1.96 * se; }
};

Estimate estimate(std::span<const double> samples);

struct RunTally {
  std::int64_t rejections = 0;
  std::int64_t false_rejections = 0;
  std::int64_t true_rejections = 0;
  std::int64_t false_nulls = 0;

  double fdr() const;
  double power() const;
};

struct ProcedureMetrics {
  std::string label;
  Estimate discoveries;
  Estimate fdr;
  Estimate power;
  Estimate false_rejections;  // mean V per run
  double empirical_mfdr = 0.0;
  double mfdr_se = 0.0;  // delta method
  std::vector<RunTally> runs;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<ProcedureMetrics> procedures;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

ProcedureMetrics summarize_runs(std::string label, std::vector<RunTally> runs,
                                double eta);

/// Quotes a CSV field when it holds a comma, quote or newline. Policy labels
/// such as "hybrid:epsilon=0.5,gamma=10" do.
std::string csv_field(const std::string& s);

void write_csv_header(std::ostream& out);
void write_csv(std::ostream& out, const ExperimentResult& result, bool header = true);

struct SubsetFdr {
  std::string label;
  Estimate subset_fdr;
  Estimate fdr;
};

/// Per run, keeps a uniformly random ceil(fraction * R) of each procedure's
/// discoveries and averages the false share of that subset.
std::vector<SubsetFdr> theorem1_check(const ExperimentConfig& config,
                                      double subset_fraction);

/// Mean difference at which a two-sided Welch test with `n_per_group` unit
/// variance points per group has power `target` at `alpha`. Common random
/// numbers plus bisection.
double calibrate_effect(std::int64_t n_per_group, double alpha, double target,
                        std::int64_t reps, std::uint64_t seed);

struct HoldoutPower {
  Estimate full;       // all n per group
  Estimate half;       // first n/2 per group
  Estimate both;       // both halves reject
};

/// One-sided Welch test of mean(b) > mean(a) with normal groups.
HoldoutPower holdout_power_study(std::int64_t n_per_group, double effect,
                                 double sigma, double alpha, std::int64_t reps,
                                 std::uint64_t seed);

// --- workflow replay ------------------------------------------------------------

struct ReplayOptions {
  double sample_fraction = 1.0;
  std::uint64_t seed = 0;
  double alpha = 0.05;
};

struct ReplayRecord {
  std::int64_t id = 0;
  std::optional<double> p_value;
  bool rejected = false;
  std::string status;  // rejected, accepted, untested, descriptive
};

struct ReplayMetrics {
  std::int64_t rejections = 0;
  std::int64_t false_rejections = 0;
  std::int64_t true_rejections = 0;
  std::int64_t labeled_true = 0;
  double fdr = 0.0;
  double power = 0.0;
};

struct ReplayReport {
  std::string procedure;
  double sample_fraction = 1.0;
  std::vector<ReplayRecord> records;
  std::optional<ReplayMetrics> metrics;

  nlohmann::json to_json() const;
};

/// Workflow lines are JSON objects:
///   {"kind": "visualization", "attribute": ..., "filters": [...], "link": <line>}
///   {"kind": "hypothesis", "test": {...}}
/// `link` is the 0-based line index of an earlier visualization. Throws
/// ReplayError on any schema problem.
std::vector<nlohmann::json> read_workflow(std::istream& in);

/// `labels` maps record id to whether the hypothesis is a true discovery,
/// typically taken from an earlier report via labels_from_report.
ReplayReport replay_workflow(const data::Dataset& dataset,
                             const std::vector<nlohmann::json>& workflow,
                             const ProcedureSpec& procedure,
                             const ReplayOptions& options,
                             const std::optional<std::map<std::int64_t, bool>>& labels);

std::map<std::int64_t, bool> labels_from_report(const nlohmann::json& report);

}  // namespace aware::sim
