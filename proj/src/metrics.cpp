#include "survhte/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace survhte {

std::string DatasetKey::label() const {
  return scenario + "/" + config + "/r" + std::to_string(repeat);
}

std::string MethodKey::label() const {
  std::string out = family + ":" + variant;
  if (!imputer.empty()) out += ":" + imputer;
  if (!base_learner.empty()) out += ":" + base_learner;
  return out;
}

double cate_rmse(std::span<const double> tau_hat, std::span<const double> tau_true) {
  if (tau_hat.empty() || tau_hat.size() != tau_true.size())
    throw std::invalid_argument("cate_rmse: length mismatch or empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < tau_hat.size(); ++i) {
    const double d = tau_hat[i] - tau_true[i];
    total += d * d;
  }
  return std::sqrt(total / static_cast<double>(tau_hat.size()));
}

double ate_bias(std::span<const double> tau_hat, double delta_true) {
  if (tau_hat.empty()) throw std::invalid_argument("ate_bias: empty input");
  double total = 0.0;
  for (double v : tau_hat) total += v;
  return total / static_cast<double>(tau_hat.size()) - delta_true;
}

double imputation_mae(std::span<const double> surrogates,
                      std::span<const double> true_event_times) {
  if (surrogates.empty() || surrogates.size() != true_event_times.size())
    throw std::invalid_argument("imputation_mae: length mismatch or empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < surrogates.size(); ++i)
    total += std::abs(surrogates[i] - true_event_times[i]);
  return total / static_cast<double>(surrogates.size());
}

double ctd_index(const std::vector<SurvivalCurve>& curves,
                 std::span<const double> times, std::span<const std::uint8_t> events) {
  const std::size_t n = times.size();
  if (curves.size() != n || events.size() != n)
    throw std::invalid_argument("ctd_index: length mismatch");
  double concordant = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!events[i]) continue;
    const double si = eval_curve(curves[i], times[i]);
    for (std::size_t j = 0; j < n; ++j) {
      if (times[i] >= times[j] || i == j) continue;
      pairs += 1.0;
      const double sj = eval_curve(curves[j], times[i]);
      if (si < sj) concordant += 1.0;
      else if (si == sj) concordant += 0.5;
    }
  }
  if (pairs == 0.0) throw std::runtime_error("ctd_index: no comparable pairs");
  return concordant / pairs;
}

double auc(std::span<const double> scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auc: length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int l : labels)
    if (l == 1) ++n_pos;
  if (n_pos == 0 || n_pos == n)
    throw std::runtime_error("auc: needs both classes");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // average ranks over tied scores
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const auto p = static_cast<double>(n_pos);
  const auto q = static_cast<double>(n - n_pos);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q);
}

namespace {

double metric_value(const MetricRecord& r, RankMetric metric) {
  return metric == RankMetric::CateRmse ? r.cate_rmse : std::abs(r.ate_bias);
}

}  // namespace

RankTable borda_rank(const std::vector<MetricRecord>& records, RankMetric metric,
                     bool allow_missing) {
  RankTable table;
  std::set<MethodKey> method_set;
  std::set<DatasetKey> dataset_set;
  std::map<std::pair<DatasetKey, MethodKey>, double> values;
  for (const auto& r : records) {
    method_set.insert(r.method);
    dataset_set.insert(r.dataset);
    if (!r.failed) values[{r.dataset, r.method}] = metric_value(r, metric);
  }
  if (method_set.empty()) throw std::invalid_argument("borda_rank: no records");
  table.methods.assign(method_set.begin(), method_set.end());
  table.datasets.assign(dataset_set.begin(), dataset_set.end());

  std::vector<std::string> missing;
  for (const auto& d : table.datasets) {
    for (const auto& m : table.methods) {
      if (!values.count({d, m})) missing.push_back(d.label() + " x " + m.label());
    }
  }
  if (!missing.empty() && !allow_missing) {
    std::string msg = "borda_rank: missing cells:";
    for (const auto& cell : missing) msg += " [" + cell + "]";
    throw std::runtime_error(msg);
  }

  const std::size_t M = table.methods.size();
  table.ranks.assign(table.datasets.size(), std::vector<double>(M, 0.0));
  // min_ranks: boundary-inclusive competition ranks used by the top-k rates
  std::vector<std::vector<double>> min_ranks(table.datasets.size(),
                                             std::vector<double>(M, 0.0));
  std::vector<std::vector<char>> present(table.datasets.size(),
                                         std::vector<char>(M, 0));

  for (std::size_t d = 0; d < table.datasets.size(); ++d) {
    std::vector<std::pair<double, std::size_t>> cells;
    for (std::size_t m = 0; m < M; ++m) {
      const auto it = values.find({table.datasets[d], table.methods[m]});
      if (it != values.end()) {
        cells.emplace_back(it->second, m);
        present[d][m] = 1;
      }
    }
    std::sort(cells.begin(), cells.end());
    std::size_t i = 0;
    while (i < cells.size()) {
      std::size_t j = i;
      while (j < cells.size() && cells[j].first == cells[i].first) ++j;
      const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
      for (std::size_t k = i; k < j; ++k) {
        table.ranks[d][cells[k].second] = avg_rank;
        min_ranks[d][cells[k].second] = static_cast<double>(i + 1);
      }
      i = j;
    }
  }

  table.borda.assign(M, 0.0);
  table.borda_se.assign(M, 0.0);
  for (std::size_t m = 0; m < M; ++m) {
    std::vector<double> rs;
    for (std::size_t d = 0; d < table.datasets.size(); ++d)
      if (present[d][m]) rs.push_back(table.ranks[d][m]);
    if (rs.empty()) {
      table.borda[m] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double mean = std::accumulate(rs.begin(), rs.end(), 0.0) / rs.size();
    table.borda[m] = mean;
    if (rs.size() > 1) {
      double ss = 0.0;
      for (double r : rs) ss += (r - mean) * (r - mean);
      table.borda_se[m] = std::sqrt(ss / (rs.size() - 1.0) / rs.size());
    }
  }

  for (int k : {1, 3, 5}) {
    auto& rates = table.winrate_topk[k];
    rates.assign(M, 0.0);
    for (std::size_t m = 0; m < M; ++m) {
      double hits = 0.0, total = 0.0;
      for (std::size_t d = 0; d < table.datasets.size(); ++d) {
        if (!present[d][m]) continue;
        total += 1.0;
        if (min_ranks[d][m] <= static_cast<double>(k)) hits += 1.0;
      }
      rates[m] = total > 0.0 ? hits / total : 0.0;
    }
  }
  return table;
}

std::map<int, std::vector<double>> win_rates(const std::vector<MetricRecord>& records,
                                             const std::vector<int>& ks,
                                             RankMetric metric, bool allow_missing) {
  auto table = borda_rank(records, metric, allow_missing);
  std::map<int, std::vector<double>> out;
  for (int k : ks) {
    const auto it = table.winrate_topk.find(k);
    if (it != table.winrate_topk.end()) {
      out[k] = it->second;
      continue;
    }
    auto& rates = out[k];
    rates.assign(table.methods.size(), 0.0);
    for (std::size_t m = 0; m < table.methods.size(); ++m) {
      double hits = 0.0, total = 0.0;
      for (std::size_t d = 0; d < table.datasets.size(); ++d) {
        if (table.ranks[d][m] <= 0.0) continue;
        total += 1.0;
        // back out the competition rank from tie-averaged ranks: a tie group
        // with average r and width t starts at r - (t-1)/2; counting methods
        // with average rank strictly below gives that start
        double below = 0.0;
        for (std::size_t o = 0; o < table.methods.size(); ++o)
          if (table.ranks[d][o] > 0.0 && table.ranks[d][o] < table.ranks[d][m])
            below += 1.0;
        if (below + 1.0 <= static_cast<double>(k)) hits += 1.0;
      }
      rates[m] = total > 0.0 ? hits / total : 0.0;
    }
  }
  return out;
}

std::string rank_table_csv(const RankTable& table) {
  std::ostringstream out;
  out << "method,mean_rank,rank_stderr\n";
  for (std::size_t m = 0; m < table.methods.size(); ++m) {
    out << table.methods[m].label() << "," << table.borda[m] << ","
        << table.borda_se[m] << "\n";
  }
  return out.str();
}

std::string rank_table_markdown(const RankTable& table) {
  std::ostringstream out;
  out << "| method | mean rank | rank stderr |\n";
  out << "|---|---|---|\n";
  std::vector<std::size_t> order(table.methods.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return table.borda[a] < table.borda[b];
  });
  for (std::size_t m : order) {
    out << "| " << table.methods[m].label() << " | " << table.borda[m] << " | "
        << table.borda_se[m] << " |\n";
  }
  out << "\nTies share averaged ranks; top-k rates count every method tied across "
         "the boundary.\n";
  return out.str();
}

std::string win_rates_csv(const RankTable& table) {
  std::ostringstream out;
  out << "method";
  for (const auto& [k, rates] : table.winrate_topk) out << ",top" << k;
  out << "\n";
  for (std::size_t m = 0; m < table.methods.size(); ++m) {
    out << table.methods[m].label();
    for (const auto& [k, rates] : table.winrate_topk) out << "," << rates[m];
    out << "\n";
  }
  return out.str();
}

}  // namespace survhte
