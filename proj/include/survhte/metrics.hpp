#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "survhte/survcurve.hpp"

namespace survhte {

struct DatasetKey {
  std::string scenario;
  std::string config;
  int repeat = 0;

  auto operator<=>(const DatasetKey&) const = default;
  std::string label() const;
};

struct MethodKey {
  std::string family;
  std::string variant;
  std::string imputer;       // empty for survival variants
  std::string base_learner;  // empty for survival variants

  auto operator<=>(const MethodKey&) const = default;
  std::string label() const;
};

struct MetricRecord {
  DatasetKey dataset;
  MethodKey method;
  double cate_rmse = 0.0;
  double ate_bias = 0.0;
  std::optional<double> impute_mae;
  std::optional<double> ctd;
  std::optional<double> auc;
  bool selected = false;  // per-family validation winner on this dataset
  bool failed = false;
  std::string error_code;  // nonempty iff failed
};

double cate_rmse(std::span<const double> tau_hat, std::span<const double> tau_true);

double ate_bias(std::span<const double> tau_hat, double delta_true);

double imputation_mae(std::span<const double> surrogates,
                      std::span<const double> true_event_times);

// Time-dependent concordance: over pairs with delta_i = 1 and t_i < t_j,
// the fraction where S_i(t_i) < S_j(t_i); prediction ties count one half.
double ctd_index(const std::vector<SurvivalCurve>& curves,
                 std::span<const double> times, std::span<const std::uint8_t> events);

// Rank-based (Mann-Whitney) AUC with tie correction.
double auc(std::span<const double> scores, const std::vector<int>& labels);

enum class RankMetric { CateRmse, AteBiasAbs };

struct RankTable {
  std::vector<MethodKey> methods;
  std::vector<DatasetKey> datasets;
  // ranks[d][m]: tie-averaged rank of method m on dataset d (1 = best)
  std::vector<std::vector<double>> ranks;
  std::vector<double> borda;     // mean rank per method
  std::vector<double> borda_se;  // standard error of the mean rank
  std::map<int, std::vector<double>> winrate_topk;
};

// Per-dataset ascending ranks with tie-averaging; failed or missing cells
// are an error unless allow_missing, in which case ranking runs over the
// present cells of each dataset.
RankTable borda_rank(const std::vector<MetricRecord>& records, RankMetric metric,
                     bool allow_missing = false);

// Fraction of datasets where the method's best-case (minimum) rank is <= k,
// so every method tied across the boundary is counted.
std::map<int, std::vector<double>> win_rates(const std::vector<MetricRecord>& records,
                                             const std::vector<int>& ks,
                                             RankMetric metric,
                                             bool allow_missing = false);

std::string rank_table_csv(const RankTable& table);
std::string rank_table_markdown(const RankTable& table);
std::string win_rates_csv(const RankTable& table);

}  // namespace survhte
