#include "aware/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "aware/baselines.hpp"
#include "aware/errors.hpp"
#include "aware/json_io.hpp"
#include "aware/session.hpp"
#include "aware/stats.hpp"

using nlohmann::json;

namespace aware::sim {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Runs body(i) for i in [0, n) on up to `threads` workers.
template <class F>
void parallel_for(std::int64_t n, unsigned threads, F&& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::int64_t>(threads, std::max<std::int64_t>(n, 1)));
  if (threads <= 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::int64_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<double> normal_sample(std::mt19937_64& rng, std::int64_t n, double mean, double sd) {
  std::normal_distribution<double> dist(mean, sd);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& x : out) x = dist(rng);
  return out;
}

RunTally tally(const std::vector<bool>& rejected, const std::vector<Hypothesis>& stream) {
  RunTally t;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (!stream[i].is_true_null) ++t.false_nulls;
    if (!rejected[i]) continue;
    ++t.rejections;
    if (stream[i].is_true_null) {
      ++t.false_rejections;
    } else {
      ++t.true_rejections;
    }
  }
  return t;
}

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(10) << v;
  return out.str();
}

}  // namespace

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

// --- procedures -----------------------------------------------------------------

bool ProcedureSpec::is_static() const {
  return kind == ProcedureKind::pcer || kind == ProcedureKind::bonferroni ||
         kind == ProcedureKind::benjamini_hochberg;
}

ProcedureSpec parse_procedure(std::string_view spec) {
  ProcedureSpec out;
  const std::string s(spec);
  out.label = s;
  if (s == "pcer") {
    out.kind = ProcedureKind::pcer;
  } else if (s == "bonferroni") {
    out.kind = ProcedureKind::bonferroni;
  } else if (s == "bh" || s == "benjamini_hochberg") {
    out.kind = ProcedureKind::benjamini_hochberg;
    out.label = "benjamini_hochberg";
  } else if (s == "forward_stop") {
    out.kind = ProcedureKind::forward_stop;
  } else if (s == "streaming_bonferroni") {
    out.kind = ProcedureKind::streaming_bonferroni;
  } else {
    out.kind = ProcedureKind::investing;
    out.policy = ledger::parse_policy(s);
    out.label = ledger::describe(out.policy);
  }
  return out;
}

std::vector<bool> run_procedure(const ProcedureSpec& procedure, std::span<const double> p,
                                std::span<const double> support, double alpha, double eta) {
  if (p.empty()) return {};
  switch (procedure.kind) {
    case ProcedureKind::pcer: return baselines::pcer(p, alpha).rejected;
    case ProcedureKind::bonferroni: return baselines::bonferroni(p, alpha).rejected;
    case ProcedureKind::benjamini_hochberg: return baselines::benjamini_hochberg(p, alpha).rejected;
    case ProcedureKind::forward_stop: return baselines::forward_stop(p, alpha).rejected;
    case ProcedureKind::streaming_bonferroni: return baselines::streaming_bonferroni(p, alpha).rejected;
    case ProcedureKind::investing: break;
  }
  auto config = ledger::LedgerConfig::with_defaults(procedure.policy, alpha);
  config.eta = eta;
  config.validate();
  auto state = ledger::initial_state(config);
  std::vector<bool> out(p.size(), false);
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::optional<double> f;
    if (i < support.size()) f = support[i];
    out[i] = ledger::step(state, config, p[i], f).outcome == ledger::Outcome::rejected;
  }
  return out;
}

// --- configuration ------------------------------------------------------------------

std::int64_t ExperimentConfig::group_size() const {
  return std::llround(static_cast<double>(n_per_group) * sample_fraction);
}

void ExperimentConfig::validate() const {
  if (m < 1) throw ConfigError("m must be at least 1");
  if (!(null_proportion >= 0.0 && null_proportion <= 1.0)) {
    throw ConfigError("null proportion must be in [0, 1]");
  }
  if (n_per_group < 1) throw ConfigError("n_per_group must be positive");
  if (!(effect_lo <= effect_hi)) throw ConfigError("effect range needs lo <= hi");
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) {
    throw ConfigError("sample fraction must be in (0, 1]");
  }
  if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0, 1)");
  if (group_size() < 2) throw ConfigError("scaled group size is below 2");
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    c.m = j.value("m", c.m);
    c.null_proportion = j.value("null_prop", c.null_proportion);
    c.n_per_group = j.value("n_per_group", c.n_per_group);
    c.effect_lo = j.value("effect_lo", c.effect_lo);
    c.effect_hi = j.value("effect_hi", c.effect_hi);
    c.sample_fraction = j.value("sample_fraction", c.sample_fraction);
    c.repetitions = j.value("reps", c.repetitions);
    c.seed = j.value("seed", c.seed);
    c.alpha = j.value("alpha", c.alpha);
    if (j.contains("eta") && !j.at("eta").is_null()) c.eta = j.at("eta").get<double>();
    c.threads = j.value("threads", c.threads);
    if (j.contains("procedures")) {
      for (const auto& p : j.at("procedures")) c.procedures.push_back(parse_procedure(p.get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  return c;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t run_index, std::uint64_t stream) {
  const std::uint64_t a = splitmix64(seed ^ splitmix64(run_index));
  const std::uint64_t b = splitmix64(a ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

// --- generation -------------------------------------------------------------------

std::vector<Hypothesis> gen_stream(const ExperimentConfig& config, std::uint64_t run_index) {
  config.validate();
  auto rng = make_rng(config.seed, run_index);
  const auto m = static_cast<std::size_t>(config.m);
  const auto nulls = static_cast<std::size_t>(
      std::llround(static_cast<double>(config.m) * config.null_proportion));
  std::vector<bool> is_null(m, false);
  std::fill(is_null.begin(), is_null.begin() + static_cast<std::ptrdiff_t>(nulls), true);
  std::shuffle(is_null.begin(), is_null.end(), rng);

  const std::size_t k = m - nulls;
  const std::int64_t n = config.group_size();
  std::vector<Hypothesis> out(m);
  std::size_t false_index = 0;
  for (std::size_t i = 0; i < m; ++i) {
    double effect = 0.0;
    if (!is_null[i]) {
      effect = k == 1 ? 0.5 * (config.effect_lo + config.effect_hi)
                      : config.effect_lo + (config.effect_hi - config.effect_lo) *
                                               static_cast<double>(false_index) /
                                               static_cast<double>(k - 1);
      ++false_index;
    }
    const auto a = normal_sample(rng, n, 0.0, 1.0);
    const auto b = normal_sample(rng, n, effect, 1.0);
    out[i].p_value = stats::welch_t_test(a, b, stats::Alternative::two_sided).p_value;
    out[i].support_fraction = config.sample_fraction;
    out[i].is_true_null = is_null[i];
  }
  return out;
}

// --- metrics ----------------------------------------------------------------------

Estimate estimate(std::span<const double> x) {
  Estimate e;
  if (x.empty()) return e;
  const double n = static_cast<double>(x.size());
  e.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  if (x.size() > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - e.mean) * (v - e.mean);
    e.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return e;
}

double RunTally::fdr() const {
  return rejections == 0 ? 0.0 : static_cast<double>(false_rejections) / static_cast<double>(rejections);
}

double RunTally::power() const {
  return false_nulls == 0 ? 0.0 : static_cast<double>(true_rejections) / static_cast<double>(false_nulls);
}

ProcedureMetrics summarize_runs(std::string label, std::vector<RunTally> runs, double eta) {
  ProcedureMetrics out;
  out.label = std::move(label);
  std::vector<double> r, v, fdr, power;
  for (const auto& t : runs) {
    r.push_back(static_cast<double>(t.rejections));
    v.push_back(static_cast<double>(t.false_rejections));
    fdr.push_back(t.fdr());
    power.push_back(t.power());
  }
  out.discoveries = estimate(r);
  out.false_rejections = estimate(v);
  out.fdr = estimate(fdr);
  out.power = estimate(power);

  const double n = static_cast<double>(runs.size());
  const double mv = out.false_rejections.mean;
  const double d = out.discoveries.mean + eta;
  out.empirical_mfdr = mv / d;
  if (runs.size() > 1) {
    double var_v = 0.0, var_r = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      var_v += (v[i] - mv) * (v[i] - mv);
      var_r += (r[i] - out.discoveries.mean) * (r[i] - out.discoveries.mean);
      cov += (v[i] - mv) * (r[i] - out.discoveries.mean);
    }
    var_v /= n - 1.0;
    var_r /= n - 1.0;
    cov /= n - 1.0;
    const double var = var_v / (d * d) + mv * mv * var_r / (d * d * d * d) - 2.0 * mv * cov / (d * d * d);
    out.mfdr_se = std::sqrt(std::max(0.0, var) / n);
  }
  out.runs = std::move(runs);
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.procedures.empty()) throw ConfigError("no procedures configured");
  const auto reps = config.repetitions;
  const auto procs = config.procedures.size();
  std::vector<std::vector<RunTally>> tallies(procs, std::vector<RunTally>(static_cast<std::size_t>(reps)));

  parallel_for(reps, config.threads, [&](std::int64_t run) {
    const auto stream = gen_stream(config, static_cast<std::uint64_t>(run));
    std::vector<double> p, f;
    for (const auto& h : stream) {
      p.push_back(h.p_value);
      f.push_back(h.support_fraction);
    }
    for (std::size_t k = 0; k < procs; ++k) {
      const auto rejected = run_procedure(config.procedures[k], p, f, config.alpha, config.effective_eta());
      tallies[k][static_cast<std::size_t>(run)] = tally(rejected, stream);
    }
  });

  ExperimentResult result;
  result.config = config;
  for (std::size_t k = 0; k < procs; ++k) {
    result.procedures.push_back(
        summarize_runs(config.procedures[k].label, std::move(tallies[k]), config.effective_eta()));
  }
  return result;
}

void write_csv_header(std::ostream& out) {
  out << "procedure,m,null_prop,sample_fraction,avg_discoveries,avg_discoveries_ci,avg_fdr,"
         "avg_fdr_ci,avg_power,avg_power_ci,empirical_mfdr,reps,seed\n";
}

void write_csv(std::ostream& out, const ExperimentResult& result, bool header) {
  if (header) write_csv_header(out);
  const auto& c = result.config;
  for (const auto& p : result.procedures) {
    out << csv_field(p.label) << ',' << c.m << ',' << format_double(c.null_proportion) << ','
        << format_double(c.sample_fraction) << ',' << format_double(p.discoveries.mean) << ','
        << format_double(p.discoveries.ci()) << ',' << format_double(p.fdr.mean) << ','
        << format_double(p.fdr.ci()) << ',' << format_double(p.power.mean) << ','
        << format_double(p.power.ci()) << ',' << format_double(p.empirical_mfdr) << ','
        << c.repetitions << ',' << c.seed << '\n';
  }
}

std::vector<SubsetFdr> theorem1_check(const ExperimentConfig& config, double subset_fraction) {
  if (!(subset_fraction > 0.0 && subset_fraction <= 1.0)) {
    throw ConfigError("subset fraction must be in (0, 1]");
  }
  config.validate();
  if (config.procedures.empty()) throw ConfigError("no procedures configured");
  const auto reps = static_cast<std::size_t>(config.repetitions);
  const auto procs = config.procedures.size();
  std::vector<std::vector<double>> subset(procs, std::vector<double>(reps));
  std::vector<std::vector<double>> full(procs, std::vector<double>(reps));

  parallel_for(config.repetitions, config.threads, [&](std::int64_t run) {
    const auto stream = gen_stream(config, static_cast<std::uint64_t>(run));
    std::vector<double> p, f;
    for (const auto& h : stream) {
      p.push_back(h.p_value);
      f.push_back(h.support_fraction);
    }
    for (std::size_t k = 0; k < procs; ++k) {
      const auto rejected = run_procedure(config.procedures[k], p, f, config.alpha, config.effective_eta());
      std::vector<std::size_t> found;
      for (std::size_t i = 0; i < rejected.size(); ++i) {
        if (rejected[i]) found.push_back(i);
      }
      const auto i = static_cast<std::size_t>(run);
      full[k][i] = tally(rejected, stream).fdr();
      if (found.empty()) {
        subset[k][i] = 0.0;
        continue;
      }
      auto rng = make_rng(config.seed, static_cast<std::uint64_t>(run), 1 + k);
      std::shuffle(found.begin(), found.end(), rng);
      const auto keep = static_cast<std::size_t>(
          std::ceil(subset_fraction * static_cast<double>(found.size()) - 1e-12));
      std::size_t bad = 0;
      for (std::size_t t = 0; t < keep; ++t) bad += stream[found[t]].is_true_null ? 1 : 0;
      subset[k][i] = static_cast<double>(bad) / static_cast<double>(keep);
    }
  });

  std::vector<SubsetFdr> out;
  for (std::size_t k = 0; k < procs; ++k) {
    out.push_back({config.procedures[k].label, estimate(subset[k]), estimate(full[k])});
  }
  return out;
}

double calibrate_effect(std::int64_t n_per_group, double alpha, double target, std::int64_t reps,
                        std::uint64_t seed) {
  if (n_per_group < 2) throw ConfigError("n_per_group must be at least 2");
  if (!(target > alpha && target < 1.0)) throw ConfigError("target power must be in (alpha, 1)");
  std::vector<std::vector<double>> a(static_cast<std::size_t>(reps));
  std::vector<std::vector<double>> b(static_cast<std::size_t>(reps));
  for (std::int64_t r = 0; r < reps; ++r) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(r), 7);
    a[r] = normal_sample(rng, n_per_group, 0.0, 1.0);
    b[r] = normal_sample(rng, n_per_group, 0.0, 1.0);
  }
  auto power = [&](double effect) {
    std::int64_t hits = 0;
    std::vector<double> shifted(static_cast<std::size_t>(n_per_group));
    for (std::int64_t r = 0; r < reps; ++r) {
      for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] = b[r][i] + effect;
      hits += stats::welch_t_test(a[r], shifted, stats::Alternative::two_sided).p_value <= alpha;
    }
    return static_cast<double>(hits) / static_cast<double>(reps);
  };
  double lo = 0.0;
  double hi = 1.0;
  while (power(hi) < target) hi *= 2.0;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (power(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

HoldoutPower holdout_power_study(std::int64_t n, double effect, double sigma, double alpha,
                                 std::int64_t reps, std::uint64_t seed) {
  if (n < 4) throw ConfigError("holdout study needs at least 4 points per group");
  const std::int64_t h = n / 2;
  std::vector<double> full(static_cast<std::size_t>(reps)), half(full.size()), both(full.size());
  for (std::int64_t r = 0; r < reps; ++r) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(r), 11);
    const auto a = normal_sample(rng, n, 0.0, sigma);
    const auto b = normal_sample(rng, n, effect, sigma);
    const std::span<const double> as(a), bs(b);
    const auto g = stats::Alternative::greater;
    const double p_full = stats::welch_t_test(bs, as, g).p_value;
    const double p1 = stats::welch_t_test(bs.first(h), as.first(h), g).p_value;
    const double p2 = stats::welch_t_test(bs.subspan(h, h), as.subspan(h, h), g).p_value;
    full[r] = p_full <= alpha;
    half[r] = p1 <= alpha;
    both[r] = baselines::holdout_test(p1, p2, alpha);
  }
  return {estimate(full), estimate(half), estimate(both)};
}

// --- workflow replay ------------------------------------------------------------------

json ReplayReport::to_json() const {
  json recs = json::array();
  for (const auto& r : records) {
    recs.push_back({{"id", r.id},
                    {"p_value", r.p_value ? json(*r.p_value) : json(nullptr)},
                    {"rejected", r.rejected},
                    {"status", r.status}});
  }
  json j{{"procedure", procedure}, {"sample_fraction", sample_fraction}, {"records", recs}};
  if (metrics) {
    j["metrics"] = {{"rejections", metrics->rejections},
                    {"false_rejections", metrics->false_rejections},
                    {"true_rejections", metrics->true_rejections},
                    {"labeled_true", metrics->labeled_true},
                    {"fdr", metrics->fdr},
                    {"power", metrics->power}};
  } else {
    j["metrics"] = nullptr;
  }
  return j;
}

std::vector<json> read_workflow(std::istream& in) {
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ReplayError(std::string("bad workflow line: ") + e.what());
    }
  }
  return out;
}

std::map<std::int64_t, bool> labels_from_report(const json& report) {
  std::map<std::int64_t, bool> out;
  try {
    for (const auto& r : report.at("records")) {
      out[r.at("id").get<std::int64_t>()] = r.at("rejected").get<bool>();
    }
  } catch (const json::exception& e) {
    throw ReplayError(std::string("bad labels file: ") + e.what());
  }
  return out;
}

ReplayReport replay_workflow(const data::Dataset& dataset, const std::vector<json>& workflow,
                             const ProcedureSpec& procedure, const ReplayOptions& options,
                             const std::optional<std::map<std::int64_t, bool>>& labels) {
  auto sampled = std::make_shared<const data::Dataset>(
      options.sample_fraction >= 1.0 ? dataset : dataset.sample(options.sample_fraction, options.seed));
  const ledger::PolicyConfig policy =
      procedure.kind == ProcedureKind::investing ? procedure.policy : ledger::PolicyConfig{ledger::Fixed{}};
  session::Session s("replay", sampled, ledger::LedgerConfig::with_defaults(policy, options.alpha));

  std::map<std::size_t, std::int64_t> viz_of_line;
  try {
    for (std::size_t i = 0; i < workflow.size(); ++i) {
      const auto& line = workflow[i];
      const auto kind = line.value("kind", std::string());
      if (kind == "visualization") {
        auto viz = line.get<session::VisualizationSpec>();
        if (line.contains("link") && !line.at("link").is_null()) {
          const auto target = line.at("link").get<std::size_t>();
          auto it = viz_of_line.find(target);
          if (it == viz_of_line.end()) throw ReplayError("link to a line that is not an earlier visualization");
          viz.linked_to = it->second;
        }
        viz_of_line[i] = s.derive_hypothesis(viz).viz_id;
      } else if (kind == "hypothesis") {
        s.add_hypothesis(session::test_spec_from_json(line.at("test")));
      } else {
        throw ReplayError("unknown workflow line kind: " + kind);
      }
    }
  } catch (const ReplayError&) {
    throw;
  } catch (const std::exception& e) {
    throw ReplayError(std::string("workflow does not fit the dataset: ") + e.what());
  }

  ReplayReport report;
  report.procedure = procedure.label;
  report.sample_fraction = options.sample_fraction;
  std::vector<std::size_t> active;
  std::vector<double> p, f;
  for (const auto& r : s.records()) {
    ReplayRecord out;
    out.id = r.id;
    if (r.result) out.p_value = r.result->p_value;
    out.status = std::string(session::to_string(r.decision));
    if (r.active()) {
      active.push_back(report.records.size());
      p.push_back(r.result->p_value);
      f.push_back(r.support_fraction);
    }
    report.records.push_back(out);
  }
  if (procedure.kind == ProcedureKind::investing) {
    for (auto& r : report.records) r.rejected = r.status == "rejected";
  } else {
    const auto rejected = run_procedure(procedure, p, f, options.alpha, 1.0 - options.alpha);
    for (std::size_t k = 0; k < active.size(); ++k) {
      auto& r = report.records[active[k]];
      r.rejected = rejected[k];
      r.status = rejected[k] ? "rejected" : "accepted";
    }
  }

  if (labels) {
    ReplayMetrics m;
    for (const auto& [id, truth] : *labels) m.labeled_true += truth ? 1 : 0;
    for (const auto& r : report.records) {
      if (!r.rejected) continue;
      ++m.rejections;
      auto it = labels->find(r.id);
      if (it != labels->end() && it->second) {
        ++m.true_rejections;
      } else {
        ++m.false_rejections;
      }
    }
    m.fdr = m.rejections == 0 ? 0.0 : static_cast<double>(m.false_rejections) / static_cast<double>(m.rejections);
    m.power = m.labeled_true == 0 ? 0.0 : static_cast<double>(m.true_rejections) / static_cast<double>(m.labeled_true);
    report.metrics = m;
  }
  return report;
}

}  // namespace aware::sim
