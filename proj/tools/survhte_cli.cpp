// Command-line front end; talks to the toolkit exclusively through the
// shared-library C interface.
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "survhte.h"

namespace {

int report_failure(const char* what, survhte_status status) {
  std::fprintf(stderr, "%s failed (status %d): %s\n", what, static_cast<int>(status),
               survhte_last_error());
  return 1;
}

bool read_text_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream buf;
  buf << in.rdbuf();
  out = buf.str();
  return true;
}

struct RunArgs {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  int threads = 0;
  bool allow_missing = false;
  std::vector<std::size_t> sizes;  // convergence only
};

void add_run_flags(CLI::App* cmd, RunArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment configuration (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_dir, "output directory")->required();
  cmd->add_option("--seed", args.seed, "override the configured seed");
  cmd->add_option("--threads", args.threads,
                  "worker threads (0: SURVHTE_THREADS, then hardware)");
  cmd->add_flag("--allow-missing", args.allow_missing,
                "rank over present cells instead of refusing on gaps");
}

int run_and_render(const RunArgs& args, bool convergence) {
  std::string config_text;
  if (!read_text_file(args.config_path, config_text)) {
    std::fprintf(stderr, "cannot read '%s'\n", args.config_path.c_str());
    return 1;
  }
  survhte_report* report = nullptr;
  survhte_status status;
  if (convergence) {
    status = survhte_convergence_run(config_text.c_str(), args.sizes.data(),
                                     args.sizes.size(), args.seed, args.threads,
                                     &report);
  } else {
    status = survhte_run_benchmark(config_text.c_str(), args.seed, args.threads,
                                   &report);
  }
  if (status != SURVHTE_OK)
    return report_failure(convergence ? "convergence" : "run", status);
  status = survhte_report_render(report, args.out_dir.c_str(),
                                 args.allow_missing ? 1 : 0);
  survhte_report_free(report);
  if (status != SURVHTE_OK) return report_failure("render", status);
  std::printf("report written to %s\n", args.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"survhte: benchmark toolkit for treatment-effect estimation "
               "under censored time-to-event outcomes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", survhte_version());

  // generate
  std::string gen_scenario, gen_config = "RCT-50", gen_estimand = "rmst", gen_out;
  std::size_t gen_n = 5000;
  std::uint64_t gen_seed = 0;
  double gen_horizon = -1.0;
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset as CSV");
  gen->add_option("--scenario", gen_scenario, "survival scenario (A..E)")->required();
  gen->add_option("--config", gen_config, "causal configuration (e.g. OBS-CPS-InfC)");
  gen->add_option("--n", gen_n, "number of units");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--estimand", gen_estimand, "rmst or surv-prob");
  gen->add_option("--horizon", gen_horizon,
                  "fixed evaluation horizon (<= 0: largest observed time)");
  gen->add_option("--out", gen_out, "output CSV path")->required();

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "execute the split/repeat benchmark");
  add_run_flags(run, run_args);

  RunArgs conv_args;
  auto* conv =
      app.add_subcommand("convergence", "training-size sweep with fixed val/test");
  add_run_flags(conv, conv_args);
  conv->add_option("--sizes", conv_args.sizes, "training sizes")->required();

  std::string rank_metrics, rank_out;
  bool rank_allow_missing = false;
  auto* rank = app.add_subcommand("rank", "rank methods from an existing metrics.csv");
  rank->add_option("--metrics", rank_metrics, "metrics.csv path")
      ->required()
      ->check(CLI::ExistingFile);
  rank->add_option("--out", rank_out, "output directory")->required();
  rank->add_flag("--allow-missing", rank_allow_missing,
                 "rank over present cells instead of refusing on gaps");

  std::string rep_metrics, rep_out;
  bool rep_allow_missing = false;
  std::uint64_t rep_seed = 0;
  auto* rep =
      app.add_subcommand("report", "full report file set from an existing metrics.csv");
  rep->add_option("--metrics", rep_metrics, "metrics.csv path")
      ->required()
      ->check(CLI::ExistingFile);
  rep->add_option("--out", rep_out, "output directory")->required();
  rep->add_option("--seed", rep_seed, "seed recorded in provenance.json");
  rep->add_flag("--allow-missing", rep_allow_missing,
                "rank over present cells instead of refusing on gaps");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    const auto status = survhte_export_dataset(
        gen_scenario.c_str(), gen_config.c_str(), gen_n, gen_seed,
        gen_estimand.c_str(), gen_horizon, gen_out.c_str());
    if (status != SURVHTE_OK) return report_failure("generate", status);
    std::printf("dataset written to %s\n", gen_out.c_str());
    return 0;
  }
  if (run->parsed()) return run_and_render(run_args, false);
  if (conv->parsed()) return run_and_render(conv_args, true);
  if (rank->parsed()) {
    const auto status = survhte_rank(rank_metrics.c_str(), rank_out.c_str(),
                                     rank_allow_missing ? 1 : 0);
    if (status != SURVHTE_OK) return report_failure("rank", status);
    std::printf("ranking written to %s\n", rank_out.c_str());
    return 0;
  }
  if (rep->parsed()) {
    const auto status =
        survhte_report_from_metrics(rep_metrics.c_str(), rep_out.c_str(),
                                    rep_allow_missing ? 1 : 0, rep_seed);
    if (status != SURVHTE_OK) return report_failure("report", status);
    std::printf("report written to %s\n", rep_out.c_str());
    return 0;
  }
  return 1;
}
