#include "survhte/impute.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace survhte {

namespace {

constexpr std::size_t kNoSkip = std::numeric_limits<std::size_t>::max();

void check_sample(const CensoredSample& sample, const ImputeOptions& options,
                  std::size_t min_n) {
  if (sample.times.size() != sample.events.size())
    throw std::invalid_argument("impute: times/events length mismatch");
  if (sample.times.size() < min_n)
    throw std::invalid_argument("impute: sample too small");
  if (options.per_arm_km && sample.w.size() != sample.times.size())
    throw std::invalid_argument("impute: per-arm imputation needs treatment labels");
}

std::vector<std::vector<std::size_t>> split_indices(const CensoredSample& sample,
                                                    const ImputeOptions& options) {
  const std::size_t n = sample.times.size();
  if (!options.per_arm_km) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    return {std::move(all)};
  }
  std::vector<std::vector<std::size_t>> groups(2);
  for (std::size_t i = 0; i < n; ++i) groups[sample.w[i] == 1 ? 1 : 0].push_back(i);
  groups.erase(std::remove_if(groups.begin(), groups.end(),
                              [](const auto& g) { return g.empty(); }),
               groups.end());
  return groups;
}

std::vector<std::size_t> sort_by_time(const CensoredSample& sample,
                                      const std::vector<std::size_t>& group) {
  std::vector<std::size_t> order = group;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sample.times[a] < sample.times[b];
  });
  return order;
}

// Area under the product-limit curve up to the largest observed time,
// computed in one pass over time-sorted indices, optionally leaving one
// unit out.
double km_mean_sorted(const CensoredSample& sample,
                      const std::vector<std::size_t>& order, std::size_t skip) {
  std::size_t at_risk = order.size() - (skip == kNoSkip ? 0 : 1);
  double area = 0.0;
  double survival = 1.0;
  double prev_t = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = sample.times[order[i]];
    std::size_t deaths = 0;
    std::size_t removed = 0;
    while (i < order.size() && sample.times[order[i]] == t) {
      if (order[i] != skip) {
        if (sample.events[order[i]]) ++deaths;
        ++removed;
      }
      ++i;
    }
    if (removed == 0) continue;
    area += survival * (t - prev_t);
    prev_t = t;
    survival *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
    at_risk -= removed;
  }
  return area;
}

void floor_outcome(ImputedOutcome& out, double raw, double observed, bool apply_floor) {
  if (apply_floor && raw < observed) {
    out.surrogate = observed;
    out.floored = true;
  } else {
    out.surrogate = raw;
    out.floored = false;
  }
}

void margin_group(const CensoredSample& sample, const std::vector<std::size_t>& group,
                  std::vector<ImputedOutcome>& out) {
  std::vector<double> times;
  std::vector<std::uint8_t> events;
  times.reserve(group.size());
  events.reserve(group.size());
  for (std::size_t i : group) {
    times.push_back(sample.times[i]);
    events.push_back(sample.events[i]);
  }
  const SurvivalCurve curve = fit_km(times, std::span<const std::uint8_t>(events));
  for (std::size_t i : group) {
    ImputedOutcome& o = out[i];
    if (sample.events[i]) {
      o.surrogate = sample.times[i];
      o.floored = false;
    } else {
      floor_outcome(o, conditional_residual_mean(curve, sample.times[i]),
                    sample.times[i], true);
    }
  }
}

void ipcw_t_group(const CensoredSample& sample, const std::vector<std::size_t>& group,
                  std::vector<ImputedOutcome>& out) {
  std::vector<double> event_times;
  for (std::size_t i : group)
    if (sample.events[i]) event_times.push_back(sample.times[i]);
  std::sort(event_times.begin(), event_times.end());
  std::vector<double> suffix_sum(event_times.size() + 1, 0.0);
  for (std::size_t k = event_times.size(); k-- > 0;)
    suffix_sum[k] = suffix_sum[k + 1] + event_times[k];

  for (std::size_t i : group) {
    ImputedOutcome& o = out[i];
    if (sample.events[i]) {
      o.surrogate = sample.times[i];
      o.floored = false;
      continue;
    }
    const auto it =
        std::upper_bound(event_times.begin(), event_times.end(), sample.times[i]);
    const std::size_t k = static_cast<std::size_t>(it - event_times.begin());
    const std::size_t count = event_times.size() - k;
    const double raw = count == 0
                           ? sample.times[i]  // no later event: keep observed time
                           : suffix_sum[k] / static_cast<double>(count);
    floor_outcome(o, raw, sample.times[i], true);
  }
}

void pseudo_obs_group(const CensoredSample& sample, const std::vector<std::size_t>& group,
                      const ImputeOptions& options, std::vector<ImputedOutcome>& out) {
  if (group.size() < 2)
    throw std::invalid_argument("impute_pseudo_obs: need at least 2 units per fit");
  const auto order = sort_by_time(sample, group);
  const double n = static_cast<double>(group.size());
  const double theta = km_mean_sorted(sample, order, kNoSkip);
  for (std::size_t i : group) {
    ImputedOutcome& o = out[i];
    if (sample.events[i] && !options.pseudo_replace_uncensored) {
      o.surrogate = sample.times[i];
      o.floored = false;
      continue;
    }
    const double raw = n * theta - (n - 1.0) * km_mean_sorted(sample, order, i);
    const bool apply_floor = !sample.events[i] || options.floor_all;
    floor_outcome(o, raw, sample.times[i], apply_floor);
  }
}

template <typename GroupFn>
std::vector<ImputedOutcome> run(const CensoredSample& sample,
                                const ImputeOptions& options, ImputeMethod method,
                                std::size_t min_n, GroupFn&& fn) {
  check_sample(sample, options, min_n);
  std::vector<ImputedOutcome> out(sample.times.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].unit_id = i;
    out[i].method = method;
  }
  for (const auto& group : split_indices(sample, options)) fn(group, out);
  return out;
}

}  // namespace

std::vector<ImputedOutcome> impute_margin(const CensoredSample& sample,
                                          const ImputeOptions& options) {
  return run(sample, options, ImputeMethod::Margin, 1,
             [&](const auto& g, auto& out) { margin_group(sample, g, out); });
}

std::vector<ImputedOutcome> impute_ipcw_t(const CensoredSample& sample,
                                          const ImputeOptions& options) {
  return run(sample, options, ImputeMethod::IpcwT, 1,
             [&](const auto& g, auto& out) { ipcw_t_group(sample, g, out); });
}

std::vector<ImputedOutcome> impute_pseudo_obs(const CensoredSample& sample,
                                              const ImputeOptions& options) {
  return run(sample, options, ImputeMethod::PseudoObs, 2,
             [&](const auto& g, auto& out) { pseudo_obs_group(sample, g, options, out); });
}

std::vector<ImputedOutcome> impute(ImputeMethod method, const CensoredSample& sample,
                                   const ImputeOptions& options) {
  switch (method) {
    case ImputeMethod::Margin: return impute_margin(sample, options);
    case ImputeMethod::IpcwT: return impute_ipcw_t(sample, options);
    case ImputeMethod::PseudoObs: return impute_pseudo_obs(sample, options);
  }
  throw std::logic_error("impute: unknown method");
}

std::string to_string(ImputeMethod m) {
  switch (m) {
    case ImputeMethod::Margin: return "margin";
    case ImputeMethod::IpcwT: return "ipcw-t";
    case ImputeMethod::PseudoObs: return "pseudo-obs";
  }
  return "?";
}

ImputeMethod impute_method_from_string(const std::string& s) {
  if (s == "margin") return ImputeMethod::Margin;
  if (s == "ipcw-t") return ImputeMethod::IpcwT;
  if (s == "pseudo-obs") return ImputeMethod::PseudoObs;
  throw std::invalid_argument("unknown imputation method: " + s);
}

}  // namespace survhte
