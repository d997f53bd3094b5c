// aware: simulation runner, workflow replay and the session HTTP service.

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

#include "aware/errors.hpp"
#include "aware/service.hpp"
#include "aware/sim.hpp"

using nlohmann::json;

namespace {

struct SimFlags {
  std::string config_path;
  std::vector<std::string> procedures;
  std::optional<std::int64_t> m;
  std::optional<double> null_prop;
  std::optional<std::int64_t> n_per_group;
  std::optional<double> effect_lo;
  std::optional<double> effect_hi;
  std::optional<double> sample_fraction;
  std::optional<std::int64_t> reps;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out;
};

void add_sim_flags(CLI::App* cmd, SimFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON file with any of the flags below");
  cmd->add_option("--procedure", f.procedures, "pcer, bonferroni, bh, forward_stop, "
                                                "streaming_bonferroni or a policy such as fixed:gamma=10");
  cmd->add_option("--m", f.m, "hypotheses per run");
  cmd->add_option("--null-prop", f.null_prop, "share of true nulls");
  cmd->add_option("--n-per-group", f.n_per_group);
  cmd->add_option("--effect-lo", f.effect_lo);
  cmd->add_option("--effect-hi", f.effect_hi);
  cmd->add_option("--sample-fraction", f.sample_fraction);
  cmd->add_option("--reps", f.reps);
  cmd->add_option("--alpha", f.alpha);
  cmd->add_option("--seed", f.seed);
  cmd->add_option("--threads", f.threads);
  cmd->add_option("--out", f.out, "output file, stdout when omitted");
}

aware::sim::ExperimentConfig build_config(const SimFlags& f) {
  aware::sim::ExperimentConfig c;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw aware::ConfigError("cannot open " + f.config_path);
    c = aware::sim::config_from_json(json::parse(in));
  }
  if (!f.procedures.empty()) {
    c.procedures.clear();
    for (const auto& p : f.procedures) c.procedures.push_back(aware::sim::parse_procedure(p));
  }
  if (c.procedures.empty()) {
    for (const char* p : {"pcer", "bonferroni", "bh", "fixed", "hopeful", "hybrid"}) {
      c.procedures.push_back(aware::sim::parse_procedure(p));
    }
  }
  if (f.m) c.m = *f.m;
  if (f.null_prop) c.null_proportion = *f.null_prop;
  if (f.n_per_group) c.n_per_group = *f.n_per_group;
  if (f.effect_lo) c.effect_lo = *f.effect_lo;
  if (f.effect_hi) c.effect_hi = *f.effect_hi;
  if (f.sample_fraction) c.sample_fraction = *f.sample_fraction;
  if (f.reps) c.repetitions = *f.reps;
  if (f.alpha) c.alpha = *f.alpha;
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  c.validate();
  return c;
}

template <class F>
void with_output(const std::string& path, F&& write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw aware::ConfigError("cannot write " + path);
  write(out);
}

aware::service::HttpServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental multiple hypothesis testing: simulations, replay and service"};
  app.require_subcommand(1);

  SimFlags sim_flags;
  auto* simulate = app.add_subcommand("simulate", "run a Monte Carlo comparison and write CSV");
  add_sim_flags(simulate, sim_flags);

  SimFlags t1_flags;
  double subset_fraction = 0.5;
  auto* theorem1 = app.add_subcommand("theorem1", "false share of a random subset of discoveries");
  add_sim_flags(theorem1, t1_flags);
  theorem1->add_option("--subset-fraction", subset_fraction);

  std::string dataset_path, workflow_path, labels_path, procedure = "fixed", replay_out;
  double replay_fraction = 1.0;
  double replay_alpha = 0.05;
  std::uint64_t replay_seed = 0;
  auto* replay = app.add_subcommand("replay", "run a recorded workflow against a dataset");
  replay->add_option("--dataset", dataset_path)->required();
  replay->add_option("--workflow", workflow_path)->required();
  replay->add_option("--procedure", procedure);
  replay->add_option("--sample-fraction", replay_fraction);
  replay->add_option("--seed", replay_seed);
  replay->add_option("--alpha", replay_alpha);
  replay->add_option("--labels", labels_path, "report of an earlier replay used as ground truth");
  replay->add_option("--out", replay_out);

  int port = 8080;
  std::string host = "127.0.0.1";
  std::string data_dir = "data";
  auto* serve = app.add_subcommand("serve", "start the session HTTP service");
  serve->add_option("--port", port);
  serve->add_option("--host", host);
  serve->add_option("--data-dir", data_dir);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      const auto config = build_config(sim_flags);
      const auto result = aware::sim::run_experiment(config);
      with_output(sim_flags.out, [&](std::ostream& out) { aware::sim::write_csv(out, result); });
    } else if (theorem1->parsed()) {
      const auto config = build_config(t1_flags);
      const auto rows = aware::sim::theorem1_check(config, subset_fraction);
      with_output(t1_flags.out, [&](std::ostream& out) {
        out << "procedure,subset_fraction,subset_fdr,subset_fdr_se,avg_fdr,avg_fdr_se,reps,seed\n";
        for (const auto& r : rows) {
          out << aware::sim::csv_field(r.label) << ',' << subset_fraction << ',' << r.subset_fdr.mean << ','
              << r.subset_fdr.se << ',' << r.fdr.mean << ',' << r.fdr.se << ','
              << config.repetitions << ',' << config.seed << '\n';
        }
      });
    } else if (replay->parsed()) {
      const auto dataset = aware::data::load_dataset(dataset_path);
      std::ifstream wf(workflow_path);
      if (!wf) throw aware::ReplayError("cannot open " + workflow_path);
      const auto workflow = aware::sim::read_workflow(wf);
      std::optional<std::map<std::int64_t, bool>> labels;
      if (!labels_path.empty()) {
        std::ifstream lf(labels_path);
        if (!lf) throw aware::ReplayError("cannot open " + labels_path);
        labels = aware::sim::labels_from_report(json::parse(lf));
      }
      aware::sim::ReplayOptions options;
      options.sample_fraction = replay_fraction;
      options.seed = replay_seed;
      options.alpha = replay_alpha;
      const auto report = aware::sim::replay_workflow(
          dataset, workflow, aware::sim::parse_procedure(procedure), options, labels);
      with_output(replay_out, [&](std::ostream& out) { out << report.to_json().dump(2) << '\n'; });
    } else if (serve->parsed()) {
      aware::service::SessionService service(data_dir);
      aware::service::HttpServer server(service);
      const int bound = server.bind(host, port);
      std::cerr << "listening on " << host << ':' << bound << '\n';
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      server.listen();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
