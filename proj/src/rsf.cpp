#include "survhte/rsf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "survhte/rng.hpp"

namespace survhte {

namespace {

constexpr std::uint64_t kStreamTree = 201;
constexpr std::uint64_t kStreamSplit = 202;
constexpr std::size_t kMaxThresholds = 32;
constexpr std::size_t kMaxGridPoints = 512;

struct TreeBuilder {
  const Eigen::MatrixXd& X;
  const std::vector<double>& times;
  const std::vector<std::uint8_t>& events;
  const RsfParams& params;
  SurvivalTree& tree;
  int tree_index;
  int mtry;

  SurvivalCurve leaf_km(const std::vector<std::size_t>& idx) const {
    std::vector<double> t;
    std::vector<std::uint8_t> e;
    t.reserve(idx.size());
    e.reserve(idx.size());
    for (std::size_t i : idx) {
      t.push_back(times[i]);
      e.push_back(events[i]);
    }
    return fit_km(t, std::span<const std::uint8_t>(e));
  }

  // Two-sample log-rank statistic for the partition x[f] <= thr, evaluated
  // over the node's time-sorted indices. Returns 0 when degenerate.
  double log_rank(const std::vector<std::size_t>& sorted_idx, int f, double thr,
                  std::size_t n_left) const {
    const std::size_t m = sorted_idx.size();
    if (n_left < static_cast<std::size_t>(params.min_leaf) ||
        m - n_left < static_cast<std::size_t>(params.min_leaf))
      return 0.0;
    double n_at_risk = static_cast<double>(m);
    double n_left_risk = static_cast<double>(n_left);
    double oe = 0.0;
    double var = 0.0;
    std::size_t i = 0;
    while (i < m) {
      const double t = times[sorted_idx[i]];
      double deaths = 0.0, deaths_left = 0.0, removed = 0.0, removed_left = 0.0;
      while (i < m && times[sorted_idx[i]] == t) {
        const std::size_t u = sorted_idx[i];
        const bool in_left = X(u, f) <= thr;
        if (events[u]) {
          deaths += 1.0;
          if (in_left) deaths_left += 1.0;
        }
        removed += 1.0;
        if (in_left) removed_left += 1.0;
        ++i;
      }
      if (deaths > 0.0 && n_at_risk > 1.0) {
        const double frac = n_left_risk / n_at_risk;
        oe += deaths_left - deaths * frac;
        var += deaths * frac * (1.0 - frac) * (n_at_risk - deaths) / (n_at_risk - 1.0);
      }
      n_at_risk -= removed;
      n_left_risk -= removed_left;
    }
    if (var <= 0.0) return 0.0;
    return std::abs(oe) / std::sqrt(var);
  }

  int build(std::vector<std::size_t>& idx) {
    const auto node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    std::size_t n_events = 0;
    for (std::size_t i : idx)
      if (events[i]) ++n_events;
    const bool can_split =
        idx.size() >= static_cast<std::size_t>(params.min_split) && n_events > 0;
    if (!can_split) {
      tree.nodes[node_id].curve = leaf_km(idx);
      return node_id;
    }

    std::vector<std::size_t> sorted_idx = idx;
    std::sort(sorted_idx.begin(), sorted_idx.end(),
              [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    // the feature sample is keyed by a traversal-order-invariant fingerprint
    // of the node's rows, so structurally mirrored trees sample identically
    const std::uint64_t node_key =
        rng::mix_key(*std::min_element(idx.begin(), idx.end()), idx.size());
    rng::Stream node_stream(params.seed,
                            rng::mix_key(static_cast<std::uint64_t>(tree_index), node_key),
                            kStreamSplit);
    std::vector<int> features(static_cast<std::size_t>(X.cols()));
    std::iota(features.begin(), features.end(), 0);
    for (int k = 0; k < mtry; ++k) {
      const auto j = k + static_cast<int>(node_stream.next_u64() % (features.size() - k));
      std::swap(features[k], features[j]);
    }

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_stat = 0.0;
    std::vector<double> vals(idx.size());
    for (int k = 0; k < mtry; ++k) {
      const int f = features[k];
      for (std::size_t i = 0; i < idx.size(); ++i) vals[i] = X(idx[i], f);
      std::sort(vals.begin(), vals.end());
      std::vector<double> distinct = vals;
      distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
      if (distinct.size() < 2) continue;

      std::vector<double> thresholds;
      if (distinct.size() - 1 <= kMaxThresholds) {
        for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
          thresholds.push_back(0.5 * (distinct[i] + distinct[i + 1]));
      } else {
        // quantile-spaced candidates over the distinct values
        for (std::size_t q = 1; q <= kMaxThresholds; ++q) {
          const std::size_t pos = q * (distinct.size() - 1) / (kMaxThresholds + 1);
          thresholds.push_back(0.5 * (distinct[pos] + distinct[pos + 1]));
        }
        thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                         thresholds.end());
      }
      for (double thr : thresholds) {
        const auto n_left = static_cast<std::size_t>(
            std::upper_bound(vals.begin(), vals.end(), thr) - vals.begin());
        const double stat = log_rank(sorted_idx, f, thr, n_left);
        if (stat > best_stat) {
          best_stat = stat;
          best_feature = f;
          best_threshold = thr;
        }
      }
    }

    if (best_feature < 0) {
      tree.nodes[node_id].curve = leaf_km(idx);
      return node_id;
    }

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx)
      (X(i, best_feature) <= best_threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    tree.nodes[node_id].feature = best_feature;
    tree.nodes[node_id].threshold = best_threshold;
    const int l = build(left);
    tree.nodes[node_id].left = l;
    const int r = build(right);
    tree.nodes[node_id].right = r;
    return node_id;
  }
};

}  // namespace

const SurvivalCurve& SurvivalTree::leaf_curve(const Eigen::VectorXd& x) const {
  int node = 0;
  while (nodes[node].feature >= 0) {
    node = x[nodes[node].feature] <= nodes[node].threshold ? nodes[node].left
                                                           : nodes[node].right;
  }
  return nodes[node].curve;
}

RsfModel fit_rsf(const Eigen::MatrixXd& X, const std::vector<double>& times,
                 const std::vector<std::uint8_t>& events, const RsfParams& params) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (times.size() != n || events.size() != n)
    throw std::invalid_argument("fit_rsf: X/times/events length mismatch");
  if (n < static_cast<std::size_t>(params.min_split))
    throw std::invalid_argument("fit_rsf: fewer rows than min_split");
  if (std::find(events.begin(), events.end(), std::uint8_t{1}) == events.end())
    throw std::invalid_argument("fit_rsf: no events in the training data");

  RsfModel model;
  model.params = params;
  model.t_max = *std::max_element(times.begin(), times.end());

  std::vector<double> event_times;
  for (std::size_t i = 0; i < n; ++i)
    if (events[i]) event_times.push_back(times[i]);
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()),
                    event_times.end());
  if (event_times.size() <= kMaxGridPoints) {
    model.time_grid = std::move(event_times);
  } else {
    for (std::size_t k = 0; k < kMaxGridPoints; ++k) {
      const std::size_t pos = k * (event_times.size() - 1) / (kMaxGridPoints - 1);
      model.time_grid.push_back(event_times[pos]);
    }
    model.time_grid.erase(std::unique(model.time_grid.begin(), model.time_grid.end()),
                          model.time_grid.end());
  }

  const int mtry = std::max(
      1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(X.cols())))));
  model.trees.resize(params.n_estimators);
  for (int t = 0; t < params.n_estimators; ++t) {
    rng::Stream stream(params.seed, static_cast<std::uint64_t>(t), kStreamTree);
    std::vector<std::size_t> idx(n);
    if (params.bootstrap) {
      for (auto& i : idx) i = stream.next_u64() % n;
    } else {
      std::iota(idx.begin(), idx.end(), 0);
    }
    TreeBuilder builder{X, times, events, params, model.trees[t], t, mtry};
    builder.build(idx);
  }
  return model;
}

SurvivalCurve predict_survival_curve(const RsfModel& model, const Eigen::VectorXd& x) {
  SurvivalCurve out;
  out.grid = model.time_grid;
  out.t_max = model.t_max;
  std::vector<double> acc(out.grid.size(), 0.0);
  for (const auto& tree : model.trees) {
    const SurvivalCurve& c = tree.leaf_curve(x);
    std::size_t j = 0;
    double s = 1.0;
    for (std::size_t k = 0; k < out.grid.size(); ++k) {
      while (j < c.grid.size() && c.grid[j] <= out.grid[k]) {
        s = c.probs[j];
        ++j;
      }
      acc[k] += s;
    }
  }
  out.probs.resize(acc.size());
  const double nt = static_cast<double>(model.trees.size());
  for (std::size_t k = 0; k < acc.size(); ++k) out.probs[k] = acc[k] / nt;
  return out;
}

}  // namespace survhte
