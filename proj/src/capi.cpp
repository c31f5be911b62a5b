#include "survhte.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "survhte/bench.hpp"
#include "survhte/csvio.hpp"

struct survhte_report {
  survhte::BenchReport report;
};

namespace {

thread_local std::string g_last_error;

survhte_status fail(survhte_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

template <typename Fn>
survhte_status guarded(Fn&& fn) {
  try {
    fn();
    return SURVHTE_OK;
  } catch (const std::invalid_argument& e) {
    return fail(SURVHTE_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(SURVHTE_ERR_RUNTIME, e.what());
  }
}

survhte_status require(bool ok, const char* what) {
  return ok ? SURVHTE_OK
            : fail(SURVHTE_ERR_INVALID_ARGUMENT,
                   std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

survhte::ExperimentConfig parse_config(const char* config_json,
                                       int64_t seed_override,
                                       int threads_override) {
  auto config = survhte::config_from_json(config_json);
  if (seed_override >= 0) config.seed = static_cast<std::uint64_t>(seed_override);
  if (threads_override > 0) config.threads = threads_override;
  return config;
}

}  // namespace

extern "C" {

const char* survhte_version(void) { return "1.0.0"; }

const char* survhte_last_error(void) { return g_last_error.c_str(); }

void survhte_string_free(char* s) { std::free(s); }

survhte_status survhte_export_dataset(const char* scenario, const char* config,
                                      size_t n, uint64_t seed,
                                      const char* estimand, double horizon,
                                      const char* path) {
  if (auto s = require(scenario, "scenario")) return s;
  if (auto s = require(config, "config")) return s;
  if (auto s = require(estimand, "estimand")) return s;
  if (auto s = require(path, "path")) return s;
  return guarded([&] {
    survhte::DatasetSpec spec;
    spec.scenario = survhte::scenario_from_string(scenario);
    spec.config = survhte::causal_config_from_string(config);
    spec.n = n;
    spec.seed = seed;
    const std::string e = estimand;
    if (e == "rmst") {
      spec.estimand = survhte::Estimand::Rmst;
    } else if (e == "surv-prob") {
      spec.estimand = survhte::Estimand::SurvProb;
    } else {
      throw std::invalid_argument("unknown estimand '" + e + "'");
    }
    if (horizon > 0.0) spec.horizon_rule = survhte::HorizonRule::fixed(horizon);
    survhte::export_dataset(spec, path);
  });
}

survhte_status survhte_run_benchmark(const char* config_json,
                                     int64_t seed_override, int threads_override,
                                     survhte_report** out) {
  if (auto s = require(config_json, "config_json")) return s;
  if (auto s = require(out, "out")) return s;
  return guarded([&] {
    auto config = parse_config(config_json, seed_override, threads_override);
    auto* handle = new survhte_report{survhte::run_benchmark(config)};
    *out = handle;
  });
}

survhte_status survhte_convergence_run(const char* config_json,
                                       const size_t* train_sizes, size_t n_sizes,
                                       int64_t seed_override, int threads_override,
                                       survhte_report** out) {
  if (auto s = require(config_json, "config_json")) return s;
  if (auto s = require(train_sizes, "train_sizes")) return s;
  if (auto s = require(out, "out")) return s;
  return guarded([&] {
    auto config = parse_config(config_json, seed_override, threads_override);
    std::vector<std::size_t> sizes(train_sizes, train_sizes + n_sizes);
    auto* handle = new survhte_report{survhte::convergence_run(config, sizes)};
    *out = handle;
  });
}

survhte_status survhte_report_metrics_csv(const survhte_report* report, char** out) {
  if (auto s = require(report, "report")) return s;
  if (auto s = require(out, "out")) return s;
  return guarded([&] { *out = dup_string(survhte::metrics_to_csv(report->report.records)); });
}

survhte_status survhte_report_render(const survhte_report* report,
                                     const char* out_dir, int allow_missing) {
  if (auto s = require(report, "report")) return s;
  if (auto s = require(out_dir, "out_dir")) return s;
  return guarded(
      [&] { survhte::render_report(report->report, out_dir, allow_missing != 0); });
}

void survhte_report_free(survhte_report* report) { delete report; }

survhte_status survhte_rank(const char* metrics_csv_path, const char* out_dir,
                            int allow_missing) {
  if (auto s = require(metrics_csv_path, "metrics_csv_path")) return s;
  if (auto s = require(out_dir, "out_dir")) return s;
  return guarded([&] {
    const auto records =
        survhte::metrics_from_csv(survhte::read_file(metrics_csv_path));
    const auto table =
        survhte::borda_rank(records, survhte::RankMetric::CateRmse, allow_missing != 0);
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const auto path = [&](const char* name) {
      return (fs::path(out_dir) / name).string();
    };
    survhte::write_file_atomic(path("borda.csv"), survhte::rank_table_csv(table));
    survhte::write_file_atomic(path("borda.md"), survhte::rank_table_markdown(table));
    survhte::write_file_atomic(path("winrates.csv"), survhte::win_rates_csv(table));
  });
}

survhte_status survhte_report_from_metrics(const char* metrics_csv_path,
                                           const char* out_dir, int allow_missing,
                                           uint64_t seed) {
  if (auto s = require(metrics_csv_path, "metrics_csv_path")) return s;
  if (auto s = require(out_dir, "out_dir")) return s;
  return guarded([&] {
    const std::string text = survhte::read_file(metrics_csv_path);
    survhte::BenchReport report;
    report.records = survhte::metrics_from_csv(text);
    report.seed = seed;
    report.config_json = text;  // provenance hash covers the input table
    survhte::render_report(report, out_dir, allow_missing != 0);
  });
}

}  // extern "C"
