#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "survhte/cate.hpp"
#include "survhte/datagen.hpp"
#include "survhte/impute.hpp"
#include "survhte/metrics.hpp"

namespace survhte {

// One cell of the method roster. `variant` is unused for the residualized
// linear family; `imputer`/`base_learner` are unused for survival variants.
struct MethodSpec {
  CateFamily family = CateFamily::ImputedMeta;
  CateVariant variant = CateVariant::S;
  ImputeMethod imputer = ImputeMethod::Margin;
  BaseLearner base_learner = BaseLearner::Lasso;

  MethodKey key() const;
};

struct ExperimentConfig {
  std::vector<Scenario> scenarios;
  std::vector<CausalConfig> configs;
  std::size_t n_train = 5000;
  std::size_t n_val = 2500;
  std::size_t n_test = 2500;
  int repeats = 10;
  std::uint64_t seed = 0;
  Estimand estimand = Estimand::Rmst;
  HorizonRule horizon_rule;
  std::vector<MethodSpec> roster;
  int matching_k = 5;
  std::size_t pool_size = 50000;
  bool regenerate_pool = false;
  int threads = 0;  // 0: --threads fallback chain (env, then hardware)
  std::string out_dir;

  void validate() const;
};

ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);

struct ConvergenceRow {
  std::size_t train_size = 0;
  MetricRecord record;
};

struct BenchReport {
  std::vector<MetricRecord> records;
  std::vector<ConvergenceRow> convergence;
  std::uint64_t seed = 0;
  std::string config_json;  // canonical form; hashed into provenance
};

// Disjoint train/val/test row indices drawn from a pool by seeded
// permutation.
struct Split {
  std::vector<std::size_t> train, val, test;
};

Split make_split(std::size_t pool_size, std::size_t n_train, std::size_t n_val,
                 std::size_t n_test, std::uint64_t seed, std::uint64_t key);

// Index of the candidate with the smallest validation RMSE against the true
// effects; exact ties keep the earliest candidate.
std::size_t select_model(const std::vector<const CateModel*>& candidates,
                         const Eigen::MatrixXd& val_x,
                         const std::vector<double>& val_tau_true);

// Fits and scores every roster cell for one repeat over an existing pool.
// Models see only the training rows; validation picks the per-family winner
// and the test rows produce the reported metrics. Failing cells come back
// with an error code instead of aborting.
std::vector<MetricRecord> run_cells(const ExperimentConfig& config,
                                    const SyntheticDataset& pool,
                                    const DatasetKey& key, int repeat,
                                    std::uint64_t split_key);

BenchReport run_benchmark(const ExperimentConfig& config);

// Re-runs the cell loop at each training size against a fixed validation and
// test split; duplicate sizes get fresh training draws.
BenchReport convergence_run(const ExperimentConfig& config,
                            const std::vector<std::size_t>& train_sizes);

void export_dataset(const DatasetSpec& spec, const std::string& path);

std::string metrics_to_csv(const std::vector<MetricRecord>& records);
std::vector<MetricRecord> metrics_from_csv(const std::string& text);
std::string convergence_to_csv(const std::vector<ConvergenceRow>& rows);

// Writes metrics.csv, borda.csv, borda.md, winrates.csv, provenance.json
// (and convergence.csv when present) into out_dir via temp-and-rename.
void render_report(const BenchReport& report, const std::string& out_dir,
                   bool allow_missing = false);

// Thread count resolution: explicit value, else SURVHTE_THREADS, else
// hardware concurrency.
int resolve_threads(int requested);

}  // namespace survhte
