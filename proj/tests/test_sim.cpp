#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "aware/baselines.hpp"
#include "aware/errors.hpp"
#include "aware/sim.hpp"
#include "oracles.hpp"

using namespace aware;
using namespace aware::sim;
using nlohmann::json;

namespace {

ExperimentConfig small(std::int64_t reps = 200) {
  ExperimentConfig c;
  c.m = 32;
  c.repetitions = reps;
  c.seed = 4;
  c.threads = 2;
  for (const char* p : {"pcer", "bonferroni", "bh", "forward_stop", "fixed", "hopeful", "hybrid"}) {
    c.procedures.push_back(parse_procedure(p));
  }
  return c;
}

const ProcedureMetrics& by_label(const ExperimentResult& r, const std::string& prefix) {
  for (const auto& p : r.procedures) {
    if (p.label.rfind(prefix, 0) == 0) return p;
  }
  throw std::runtime_error("no procedure " + prefix);
}

std::string csv_of(const ExperimentResult& r) {
  std::ostringstream out;
  write_csv(out, r);
  return out.str();
}

json viz_line(std::string target, json filters, std::optional<int> link = std::nullopt) {
  json j{{"kind", "visualization"}, {"target", target}, {"filters", filters}};
  if (link) j["link"] = *link;
  return j;
}

json rich(bool negated = false) {
  return {{"column", "salary"}, {"op", "range"}, {"lo", 60000}, {"negated", negated}};
}

}  // namespace

TEST(Procedures, Parse) {
  EXPECT_EQ(parse_procedure("pcer").kind, ProcedureKind::pcer);
  EXPECT_EQ(parse_procedure("bh").kind, ProcedureKind::benjamini_hochberg);
  EXPECT_EQ(parse_procedure("bh").label, "benjamini_hochberg");
  EXPECT_EQ(parse_procedure("forward_stop").kind, ProcedureKind::forward_stop);
  const auto h = parse_procedure("hybrid:epsilon=0.5");
  EXPECT_EQ(h.kind, ProcedureKind::investing);
  EXPECT_EQ(h.label, ledger::describe(h.policy));
  EXPECT_THROW(parse_procedure("magic"), ConfigError);
}

TEST(Procedures, InvestingMatchesLedgerStream) {
  const std::vector<double> p = {0.001, 0.5, 0.002, 0.9, 0.0001};
  const std::vector<double> f(p.size(), 1.0);
  const auto proc = parse_procedure("hopeful");
  const auto got = run_procedure(proc, p, f, 0.05, 0.95);
  auto config = ledger::LedgerConfig::with_defaults(proc.policy);
  std::vector<ledger::StreamItem> items;
  for (double x : p) items.push_back({x, 1.0});
  const auto want = ledger::run_stream(config, items);
  for (std::size_t k = 0; k < p.size(); ++k) {
    EXPECT_EQ(got[k], want[k].outcome == ledger::Outcome::rejected);
  }
  EXPECT_EQ(run_procedure(parse_procedure("bh"), p, f, 0.05, 0.95),
            baselines::benjamini_hochberg(p, 0.05).rejected);
}

TEST(GenStream, CompleteNullIsUniform) {
  ExperimentConfig c;
  c.m = 50;
  c.null_proportion = 1.0;
  std::vector<double> p;
  for (std::uint64_t run = 0; run < 200; ++run) {
    const auto s = gen_stream(c, run);
    ASSERT_EQ(s.size(), 50u);
    for (const auto& h : s) {
      EXPECT_TRUE(h.is_true_null);
      p.push_back(h.p_value);
    }
  }
  EXPECT_LT(oracle::ks_uniform(p), 0.02);
}

TEST(GenStream, DeterministicPerRunIndex) {
  ExperimentConfig c;
  const auto a = gen_stream(c, 7);
  const auto b = gen_stream(c, 7);
  const auto d = gen_stream(c, 8);
  ASSERT_EQ(a.size(), b.size());
  bool differs = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].p_value, b[k].p_value);
    EXPECT_EQ(a[k].is_true_null, b[k].is_true_null);
    differs |= a[k].p_value != d[k].p_value;
  }
  EXPECT_TRUE(differs);
}

TEST(GenStream, NullCountAndPositions) {
  ExperimentConfig c;
  c.m = 64;
  c.null_proportion = 0.75;
  std::vector<int> first_false(64, 0);
  for (std::uint64_t run = 0; run < 300; ++run) {
    const auto s = gen_stream(c, run);
    int nulls = 0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      nulls += s[k].is_true_null;
      first_false[k] += !s[k].is_true_null;
    }
    EXPECT_EQ(nulls, 48);
  }
  // false nulls are spread over the stream, not packed at the front
  EXPECT_GT(first_false.back(), 0);
  EXPECT_LT(first_false.front(), 300);
}

TEST(GenStream, FalseNullsAreSmallOnAverage) {
  ExperimentConfig c;
  c.null_proportion = 0.0;
  c.m = 20;
  c.effect_lo = 3.0;
  c.effect_hi = 3.0;
  int hits = 0, total = 0;
  for (std::uint64_t run = 0; run < 100; ++run) {
    for (const auto& h : gen_stream(c, run)) {
      hits += h.p_value <= 0.05;
      ++total;
    }
  }
  EXPECT_GT(static_cast<double>(hits) / total, 0.9);
}

TEST(Experiment, ConfigValidation) {
  ExperimentConfig c;
  c.m = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.null_proportion = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.sample_fraction = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.effect_lo = 3.0;
  c.effect_hi = 2.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.repetitions = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Experiment, ConfigFromJson) {
  const auto c = config_from_json({{"m", 16}, {"null_prop", 0.5}, {"reps", 10},
                                   {"procedures", {"bh", "fixed"}}});
  EXPECT_EQ(c.m, 16);
  EXPECT_EQ(c.null_proportion, 0.5);
  EXPECT_EQ(c.repetitions, 10);
  ASSERT_EQ(c.procedures.size(), 2u);
  EXPECT_THROW(config_from_json({{"m", "many"}}), ConfigError);
}

TEST(Experiment, CompleteNullHasNoPower) {
  auto c = small(100);
  c.null_proportion = 1.0;
  const auto r = run_experiment(c);
  for (const auto& p : r.procedures) {
    EXPECT_EQ(p.power.mean, 0.0) << p.label;
    for (const auto& t : p.runs) EXPECT_EQ(t.true_rejections, 0);
  }
}

TEST(Experiment, Accounting) {
  const auto r = run_experiment(small(100));
  for (const auto& p : r.procedures) {
    ASSERT_EQ(p.runs.size(), 100u);
    for (const auto& t : p.runs) {
      EXPECT_EQ(t.false_rejections + t.true_rejections, t.rejections);
      EXPECT_EQ(t.false_nulls, 8);
      EXPECT_GE(t.fdr(), 0.0);
      EXPECT_LE(t.fdr(), 1.0);
      EXPECT_LE(t.power(), 1.0);
    }
  }
}

TEST(Experiment, StaticProceduresNest) {
  const auto r = run_experiment(small(100));
  const auto& b = by_label(r, "bonferroni");
  const auto& h = by_label(r, "benjamini_hochberg");
  const auto& c = by_label(r, "pcer");
  for (std::size_t k = 0; k < 100; ++k) {
    EXPECT_LE(b.runs[k].rejections, h.runs[k].rejections);
    EXPECT_LE(h.runs[k].rejections, c.runs[k].rejections);
  }
}

TEST(Experiment, ThreadCountDoesNotChangeOutput) {
  auto c = small(60);
  c.threads = 1;
  const auto one = csv_of(run_experiment(c));
  c.threads = 3;
  EXPECT_EQ(csv_of(run_experiment(c)), one);
  EXPECT_EQ(csv_of(run_experiment(c)), one);
}

TEST(Experiment, CsvLayout) {
  const auto text = csv_of(run_experiment(small(20)));
  std::istringstream in(text);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header,
            "procedure,m,null_prop,sample_fraction,avg_discoveries,avg_discoveries_ci,avg_fdr,"
            "avg_fdr_ci,avg_power,avg_power_ci,empirical_mfdr,reps,seed");
  int rows = 0;
  for (std::string line; std::getline(in, line);) {
    ++rows;
    // quoted labels may hold commas
    const auto close = line.rfind('"');
    const auto tail = close == std::string::npos ? line : line.substr(close);
    EXPECT_EQ(std::count(tail.begin(), tail.end(), ','), 12) << line;
  }
  EXPECT_EQ(rows, 7);
}

TEST(Experiment, EstimateAndMfdr) {
  const std::vector<double> x = {1, 2, 3, 4};
  const auto e = estimate(x);
  EXPECT_DOUBLE_EQ(e.mean, 2.5);
  EXPECT_NEAR(e.se, std::sqrt(1.6666666666666667 / 4.0), 1e-15);
  std::vector<RunTally> runs(4);
  runs[0] = {2, 1, 1, 4};
  runs[1] = {0, 0, 0, 4};
  runs[2] = {3, 0, 3, 4};
  runs[3] = {1, 1, 0, 4};
  const auto m = summarize_runs("x", runs, 0.95);
  EXPECT_NEAR(m.empirical_mfdr, 0.5 / (1.5 + 0.95), 1e-15);
  EXPECT_NEAR(m.fdr.mean, (0.5 + 0 + 0 + 1) / 4.0, 1e-15);
  EXPECT_NEAR(m.power.mean, (0.25 + 0 + 0.75 + 0) / 4.0, 1e-15);
  EXPECT_GT(m.mfdr_se, 0.0);
}

TEST(Theorem1, FullSubsetEqualsFdr) {
  const auto rows = theorem1_check(small(100), 1.0);
  const auto r = run_experiment(small(100));
  ASSERT_EQ(rows.size(), r.procedures.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_DOUBLE_EQ(rows[k].subset_fdr.mean, rows[k].fdr.mean);
    EXPECT_DOUBLE_EQ(rows[k].fdr.mean, r.procedures[k].fdr.mean);
  }
  EXPECT_THROW(theorem1_check(small(10), 0.0), ConfigError);
}

TEST(Holdout, PowerStudyShape) {
  const auto h = holdout_power_study(100, 1.0, 4.0, 0.05, 400, 3);
  EXPECT_GT(h.full.mean, h.half.mean);
  EXPECT_GE(h.half.mean, h.both.mean);
}

TEST(Calibrate, HitsTargetPower) {
  const double effect = calibrate_effect(10, 0.05, 0.8, 4000, 5);
  ExperimentConfig c;
  c.m = 1;
  c.null_proportion = 0.0;
  c.effect_lo = effect;
  c.effect_hi = effect;
  c.repetitions = 4000;
  c.seed = 77;
  c.procedures = {parse_procedure("pcer")};
  const auto r = run_experiment(c);
  EXPECT_NEAR(r.procedures[0].power.mean, 0.8, 0.03);
}

TEST(Replay, BonferroniLabelsReproduceThemselves) {
  const auto d = oracle::census(3000, 21, 15000.0);
  const json welch{{"kind", "welch_t"},
                   {"target", "age"},
                   {"filters_a", {{{"column", "gender"}, {"value", "m"}}}},
                   {"filters_b", {{{"column", "gender"}, {"value", "f"}}}}};
  const std::vector<json> workflow = {
      viz_line("education", json::array()),
      viz_line("gender", json::array({rich()})),
      viz_line("gender", json::array({rich(true)}), 1),
      viz_line("region", json::array({{{"column", "gender"}, {"value", "m"}}})),
      {{"kind", "hypothesis"}, {"test", welch}},
  };
  const auto truth = replay_workflow(d, workflow, parse_procedure("bonferroni"), {}, std::nullopt);
  const auto labels = labels_from_report(truth.to_json());
  const auto again = replay_workflow(d, workflow, parse_procedure("bonferroni"), {}, labels);
  ASSERT_TRUE(again.metrics.has_value());
  EXPECT_EQ(again.metrics->false_rejections, 0);
  EXPECT_EQ(again.metrics->fdr, 0.0);
  EXPECT_EQ(again.metrics->power, again.metrics->labeled_true ? 1.0 : 0.0);
  EXPECT_EQ(truth.records[0].status, "descriptive");
}

TEST(Replay, EmptyWorkflow) {
  const auto d = oracle::census(100, 1);
  const auto r = replay_workflow(d, {}, parse_procedure("fixed"), {}, std::nullopt);
  EXPECT_TRUE(r.records.empty());
}

TEST(Replay, SampledDatasetAndErrors) {
  const auto d = oracle::census(2000, 2);
  ReplayOptions o;
  o.sample_fraction = 0.1;
  o.seed = 9;
  const std::vector<json> workflow = {viz_line("gender", json::array({rich()}))};
  const auto r = replay_workflow(d, workflow, parse_procedure("hybrid"), o, std::nullopt);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.sample_fraction, 0.1);
  EXPECT_THROW(replay_workflow(d, {viz_line("height", json::array())}, parse_procedure("fixed"), {},
                               std::nullopt),
               ReplayError);
  EXPECT_THROW(replay_workflow(d, {viz_line("gender", json::array(), 3)}, parse_procedure("fixed"),
                               {}, std::nullopt),
               ReplayError);
  std::istringstream bad("{\"kind\": \"visualization\"\nnot json\n");
  EXPECT_THROW(read_workflow(bad), ReplayError);
}
