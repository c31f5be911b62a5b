#include "survhte/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "survhte/csvio.hpp"
#include "survhte/rng.hpp"

namespace survhte {

namespace {

constexpr std::uint64_t kStreamBenchSplit = 102;
constexpr const char* kToolkitVersion = "1.0.0";

std::string to_string(Estimand e) {
  return e == Estimand::Rmst ? "rmst" : "surv-prob";
}

Estimand estimand_from_string(const std::string& s) {
  if (s == "rmst") return Estimand::Rmst;
  if (s == "surv-prob") return Estimand::SurvProb;
  throw std::invalid_argument("unknown estimand '" + s + "'");
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

MethodKey MethodSpec::key() const {
  MethodKey k;
  k.family = survhte::to_string(family);
  if (family != CateFamily::DoubleMl) k.variant = survhte::to_string(variant);
  if (family != CateFamily::SurvMeta) {
    k.imputer = survhte::to_string(imputer);
    k.base_learner = survhte::to_string(base_learner);
  }
  return k;
}

void ExperimentConfig::validate() const {
  if (scenarios.empty()) throw std::invalid_argument("config: no scenarios");
  if (configs.empty()) throw std::invalid_argument("config: no causal configurations");
  for (const auto& c : configs) c.validate();
  if (repeats < 1) throw std::invalid_argument("config: repeats must be >= 1");
  if (n_train == 0 || n_val == 0 || n_test == 0)
    throw std::invalid_argument("config: split sizes must be positive");
  if (n_train + n_val + n_test > pool_size)
    throw std::invalid_argument("config: train+val+test exceeds the pool size");
}

ExperimentConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  for (const auto& s : j.at("scenarios"))
    c.scenarios.push_back(scenario_from_string(s.get<std::string>()));
  for (const auto& s : j.at("configs"))
    c.configs.push_back(causal_config_from_string(s.get<std::string>()));
  c.n_train = j.value("n_train", c.n_train);
  c.n_val = j.value("n_val", c.n_val);
  c.n_test = j.value("n_test", c.n_test);
  c.repeats = j.value("repeats", c.repeats);
  c.seed = j.value("seed", c.seed);
  c.estimand = estimand_from_string(j.value("estimand", std::string("rmst")));
  if (j.contains("horizon") && !j["horizon"].is_null())
    c.horizon_rule = HorizonRule::fixed(j["horizon"].get<double>());
  c.matching_k = j.value("matching_k", c.matching_k);
  c.pool_size = j.value("pool_size", c.pool_size);
  c.regenerate_pool = j.value("regenerate_pool", c.regenerate_pool);
  c.threads = j.value("threads", c.threads);
  c.out_dir = j.value("out_dir", c.out_dir);
  for (const auto& m : j.value("roster", nlohmann::json::array())) {
    MethodSpec spec;
    spec.family = cate_family_from_string(m.at("family").get<std::string>());
    if (m.contains("variant"))
      spec.variant = cate_variant_from_string(m["variant"].get<std::string>());
    if (m.contains("imputer"))
      spec.imputer = impute_method_from_string(m["imputer"].get<std::string>());
    if (m.contains("base_learner"))
      spec.base_learner = base_learner_from_string(m["base_learner"].get<std::string>());
    c.roster.push_back(spec);
  }
  c.validate();
  return c;
}

std::string config_to_json(const ExperimentConfig& config) {
  nlohmann::ordered_json j;
  j["scenarios"] = nlohmann::json::array();
  for (auto s : config.scenarios) j["scenarios"].push_back(survhte::to_string(s));
  j["configs"] = nlohmann::json::array();
  for (const auto& c : config.configs) j["configs"].push_back(survhte::to_string(c));
  j["n_train"] = config.n_train;
  j["n_val"] = config.n_val;
  j["n_test"] = config.n_test;
  j["repeats"] = config.repeats;
  j["seed"] = config.seed;
  j["estimand"] = to_string(config.estimand);
  if (config.horizon_rule.kind == HorizonRule::Kind::Fixed)
    j["horizon"] = config.horizon_rule.value;
  else
    j["horizon"] = nullptr;
  j["matching_k"] = config.matching_k;
  j["pool_size"] = config.pool_size;
  j["regenerate_pool"] = config.regenerate_pool;
  j["threads"] = config.threads;
  j["out_dir"] = config.out_dir;
  j["roster"] = nlohmann::json::array();
  for (const auto& m : config.roster) {
    nlohmann::ordered_json cell;
    cell["family"] = survhte::to_string(m.family);
    if (m.family != CateFamily::DoubleMl)
      cell["variant"] = survhte::to_string(m.variant);
    if (m.family != CateFamily::SurvMeta) {
      cell["imputer"] = survhte::to_string(m.imputer);
      cell["base_learner"] = survhte::to_string(m.base_learner);
    }
    j["roster"].push_back(cell);
  }
  return j.dump(2);
}

Split make_split(std::size_t pool_size, std::size_t n_train, std::size_t n_val,
                 std::size_t n_test, std::uint64_t seed, std::uint64_t key) {
  if (n_train + n_val + n_test > pool_size)
    throw std::invalid_argument("make_split: sizes exceed the pool");
  std::vector<std::size_t> perm(pool_size);
  std::iota(perm.begin(), perm.end(), 0);
  rng::Stream stream(seed, key, kStreamBenchSplit);
  for (std::size_t i = pool_size - 1; i > 0; --i) {
    const std::size_t j = stream.next_u64() % (i + 1);
    std::swap(perm[i], perm[j]);
  }
  Split split;
  split.train.assign(perm.begin(), perm.begin() + n_train);
  split.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  split.test.assign(perm.begin() + n_train + n_val,
                    perm.begin() + n_train + n_val + n_test);
  return split;
}

std::size_t select_model(const std::vector<const CateModel*>& candidates,
                         const Eigen::MatrixXd& val_x,
                         const std::vector<double>& val_tau_true) {
  if (candidates.empty()) throw std::invalid_argument("select_model: no candidates");
  std::size_t best = 0;
  double best_rmse = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Eigen::VectorXd tau_hat = candidates[i]->predict(val_x);
    std::vector<double> v(tau_hat.data(), tau_hat.data() + tau_hat.size());
    const double rmse = cate_rmse(v, val_tau_true);
    if (rmse < best_rmse) {  // strict: ties keep the earliest candidate
      best_rmse = rmse;
      best = i;
    }
  }
  return best;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SURVHTE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

namespace {

struct Subset {
  Eigen::MatrixXd x;
  std::vector<int> w;
  std::vector<double> times;
  std::vector<std::uint8_t> events;
  std::vector<double> tau_true;
  std::vector<double> t_assigned;  // true event time under the assigned arm
};

Subset take(const SyntheticDataset& pool, const std::vector<std::size_t>& idx) {
  Subset s;
  s.x.resize(static_cast<Eigen::Index>(idx.size()), 5);
  s.w.reserve(idx.size());
  s.times.reserve(idx.size());
  s.events.reserve(idx.size());
  s.tau_true.reserve(idx.size());
  s.t_assigned.reserve(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const Unit& u = pool.units[idx[r]];
    for (int j = 0; j < 5; ++j) s.x(static_cast<Eigen::Index>(r), j) = u.latents.x[j];
    s.w.push_back(u.w);
    s.times.push_back(u.obs_time);
    s.events.push_back(u.event ? 1 : 0);
    s.tau_true.push_back(u.cate_true);
    s.t_assigned.push_back(u.w ? u.t1 : u.t0);
  }
  return s;
}

double true_ate_cached(const SyntheticDataset& pool) {
  struct Key {
    std::string label;
    std::string estimand;
    double horizon;
    auto operator<=>(const Key&) const = default;
  };
  static std::map<Key, double> cache;
  static std::mutex mutex;
  const Key key{survhte::to_string(pool.scenario) + "/" + survhte::to_string(pool.config),
                pool.estimand == Estimand::Rmst ? "rmst" : "sp", pool.horizon};
  {
    std::lock_guard<std::mutex> lock(mutex);
    const auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  const double value =
      true_ate(pool.scenario, pool.config, pool.estimand, pool.horizon);
  std::lock_guard<std::mutex> lock(mutex);
  cache[key] = value;
  return value;
}

struct CellResult {
  MetricRecord record;
  double val_rmse = std::numeric_limits<double>::infinity();
};

CellResult run_one_cell(const ExperimentConfig& config, const MethodSpec& spec,
                        const Subset& train, const Subset& val, const Subset& test,
                        const SyntheticDataset& pool, const DatasetKey& key,
                        double delta_true, std::uint64_t fit_seed) {
  CellResult out;
  out.record.dataset = key;
  out.record.method = spec.key();
  try {
    CateOptions opt;
    opt.base_learner = spec.base_learner;
    opt.matching_k = config.matching_k;
    opt.estimand = pool.estimand;
    opt.horizon = pool.horizon;
    opt.seed = fit_seed;
    opt.rsf.seed = fit_seed;

    CateModel model;
    if (spec.family == CateFamily::SurvMeta) {
      model = fit_survival_meta(spec.variant, train.x, train.w, train.times,
                                train.events, opt);
    } else {
      CensoredSample sample{train.times, train.events, train.w};
      const auto imputed = impute(spec.imputer, sample);
      Eigen::VectorXd y(static_cast<Eigen::Index>(imputed.size()));
      for (std::size_t i = 0; i < imputed.size(); ++i)
        y[static_cast<Eigen::Index>(i)] = imputed[i].surrogate;
      // averaged over every unit; uncensored units keep their observed (true)
      // times and contribute zero error
      double mae_sum = 0.0;
      for (std::size_t i = 0; i < imputed.size(); ++i)
        mae_sum += std::abs(imputed[i].surrogate - train.t_assigned[i]);
      out.record.impute_mae = mae_sum / static_cast<double>(imputed.size());
      model = spec.family == CateFamily::DoubleMl
                  ? fit_double_ml(train.x, train.w, y, opt)
                  : fit_imputed_meta(spec.variant, train.x, train.w, y, opt);
    }

    const Eigen::VectorXd val_hat = model.predict(val.x);
    std::vector<double> val_vec(val_hat.data(), val_hat.data() + val_hat.size());
    out.val_rmse = cate_rmse(val_vec, val.tau_true);

    const Eigen::VectorXd test_hat = model.predict(test.x);
    std::vector<double> test_vec(test_hat.data(), test_hat.data() + test_hat.size());
    out.record.cate_rmse = cate_rmse(test_vec, test.tau_true);
    out.record.ate_bias = ate_bias(test_vec, delta_true);
  } catch (const std::exception& e) {
    out.record.failed = true;
    out.record.error_code = e.what();
  }
  return out;
}

std::vector<MetricRecord> run_cells_on_split(const ExperimentConfig& config,
                                             const SyntheticDataset& pool,
                                             const DatasetKey& key,
                                             const Split& split,
                                             std::uint64_t fit_seed_base) {
  const Subset train = take(pool, split.train);
  const Subset val = take(pool, split.val);
  const Subset test = take(pool, split.test);
  const double delta_true = true_ate_cached(pool);

  std::vector<CellResult> results(config.roster.size());
  const int n_threads = std::min<int>(resolve_threads(config.threads),
                                      static_cast<int>(config.roster.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= config.roster.size()) break;
      const std::uint64_t fit_seed = rng::mix_key(fit_seed_base, i);
      results[i] = run_one_cell(config, config.roster[i], train, val, test, pool,
                                key, delta_true, fit_seed);
    }
  };
  if (n_threads > 1) {
    std::vector<std::thread> threads;
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  } else {
    worker();
  }

  // validation winner per family, earliest roster position on ties
  std::map<std::string, std::size_t> winner;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].record.failed) continue;
    const std::string family = results[i].record.method.family;
    const auto it = winner.find(family);
    if (it == winner.end() || results[i].val_rmse < results[it->second].val_rmse)
      winner[family] = i;
  }
  for (const auto& [family, i] : winner) results[i].record.selected = true;

  std::vector<MetricRecord> records;
  records.reserve(results.size());
  for (auto& r : results) records.push_back(std::move(r.record));
  return records;
}

SyntheticDataset build_pool(const ExperimentConfig& config, Scenario scenario,
                            const CausalConfig& causal, std::uint64_t pool_key) {
  DatasetSpec spec;
  spec.scenario = scenario;
  spec.config = causal;
  spec.n = config.pool_size;
  spec.seed = rng::mix_key(config.seed, pool_key);
  spec.estimand = config.estimand;
  spec.horizon_rule = config.horizon_rule;
  return build_dataset(spec);
}

}  // namespace

std::vector<MetricRecord> run_cells(const ExperimentConfig& config,
                                    const SyntheticDataset& pool,
                                    const DatasetKey& key, int repeat,
                                    std::uint64_t split_key) {
  const Split split = make_split(pool.units.size(), config.n_train, config.n_val,
                                 config.n_test, config.seed,
                                 rng::mix_key(split_key, static_cast<std::uint64_t>(repeat)));
  return run_cells_on_split(config, pool, key, split,
                            rng::mix_key(split_key, 0x9E3779B97F4A7C15ULL + repeat));
}

BenchReport run_benchmark(const ExperimentConfig& config) {
  config.validate();
  BenchReport report;
  report.seed = config.seed;
  report.config_json = config_to_json(config);

  std::uint64_t dataset_idx = 0;
  for (auto scenario : config.scenarios) {
    for (const auto& causal : config.configs) {
      SyntheticDataset pool;
      if (!config.regenerate_pool)
        pool = build_pool(config, scenario, causal, dataset_idx);
      for (int r = 0; r < config.repeats; ++r) {
        if (config.regenerate_pool)
          pool = build_pool(config, scenario, causal,
                            rng::mix_key(dataset_idx, static_cast<std::uint64_t>(r) + 1));
        const DatasetKey key{survhte::to_string(scenario), survhte::to_string(causal), r};
        auto records = run_cells(config, pool, key, r, dataset_idx);
        report.records.insert(report.records.end(),
                              std::make_move_iterator(records.begin()),
                              std::make_move_iterator(records.end()));
      }
      ++dataset_idx;
    }
  }
  return report;
}

BenchReport convergence_run(const ExperimentConfig& config,
                            const std::vector<std::size_t>& train_sizes) {
  config.validate();
  if (train_sizes.empty())
    throw std::invalid_argument("convergence_run: no training sizes");
  for (std::size_t s : train_sizes) {
    if (s == 0 || s + config.n_val + config.n_test > config.pool_size)
      throw std::invalid_argument("convergence_run: training size does not fit the pool");
  }
  BenchReport report;
  report.seed = config.seed;
  report.config_json = config_to_json(config);

  std::uint64_t dataset_idx = 0;
  for (auto scenario : config.scenarios) {
    for (const auto& causal : config.configs) {
      const SyntheticDataset pool = build_pool(config, scenario, causal, dataset_idx);
      // one permutation fixes validation and test; training draws reshuffle
      // the remainder per size index, so duplicate sizes differ
      std::vector<std::size_t> perm(pool.units.size());
      std::iota(perm.begin(), perm.end(), 0);
      rng::Stream base(config.seed, rng::mix_key(dataset_idx, 0xF17EDULL),
                       kStreamBenchSplit);
      for (std::size_t i = perm.size() - 1; i > 0; --i)
        std::swap(perm[i], perm[base.next_u64() % (i + 1)]);
      Split split;
      split.val.assign(perm.begin(), perm.begin() + config.n_val);
      split.test.assign(perm.begin() + config.n_val,
                        perm.begin() + config.n_val + config.n_test);
      std::vector<std::size_t> rest(perm.begin() + config.n_val + config.n_test,
                                    perm.end());

      for (std::size_t si = 0; si < train_sizes.size(); ++si) {
        std::vector<std::size_t> pick = rest;
        rng::Stream draw(config.seed, rng::mix_key(dataset_idx, 0xC0 + si),
                         kStreamBenchSplit);
        for (std::size_t i = pick.size() - 1; i > 0; --i)
          std::swap(pick[i], pick[draw.next_u64() % (i + 1)]);
        split.train.assign(pick.begin(), pick.begin() + train_sizes[si]);

        const DatasetKey key{survhte::to_string(scenario), survhte::to_string(causal),
                             static_cast<int>(si)};
        auto records = run_cells_on_split(config, pool, key, split,
                                          rng::mix_key(dataset_idx, 0xBEEF00 + si));
        for (auto& r : records)
          report.convergence.push_back({train_sizes[si], std::move(r)});
      }
      ++dataset_idx;
    }
  }
  return report;
}

void export_dataset(const DatasetSpec& spec, const std::string& path) {
  if (spec.n == 0) throw std::invalid_argument("export_dataset: n must be positive");
  const auto dataset = build_dataset(spec);
  try {
    write_file_atomic(path, dataset_to_csv(dataset));
  } catch (const std::exception& e) {
    throw std::runtime_error("export_dataset('" + path + "'): " + e.what());
  }
}

std::string metrics_to_csv(const std::vector<MetricRecord>& records) {
  std::ostringstream out;
  out << "scenario,config,repeat,family,variant,imputer,base_learner,selected,"
         "cate_rmse,ate_bias,impute_mae,error\n";
  for (const auto& r : records) {
    out << r.dataset.scenario << ',' << r.dataset.config << ',' << r.dataset.repeat
        << ',' << r.method.family << ',' << r.method.variant << ','
        << r.method.imputer << ',' << r.method.base_learner << ','
        << (r.selected ? 1 : 0) << ',';
    if (!r.failed) {
      out << format_double(r.cate_rmse) << ',' << format_double(r.ate_bias) << ',';
      if (r.impute_mae) out << format_double(*r.impute_mae);
      out << ",\n";
    } else {
      std::string err = r.error_code;
      for (auto& c : err)
        if (c == ',' || c == '\n') c = ';';
      out << ",,," << err << "\n";
    }
  }
  return out.str();
}

std::vector<MetricRecord> metrics_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("metrics csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("scenario,config,repeat,family,variant,imputer,base_learner,"
                 "selected,cate_rmse,ate_bias,impute_mae,error", 0) != 0)
    throw std::runtime_error("metrics csv: unexpected header '" + line + "'");
  std::vector<MetricRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 12)
      throw std::runtime_error("metrics csv: expected 12 fields on line " +
                               std::to_string(line_no));
    MetricRecord r;
    r.dataset = {f[0], f[1], std::stoi(f[2])};
    r.method = {f[3], f[4], f[5], f[6]};
    r.selected = f[7] == "1";
    if (!f[11].empty()) {
      r.failed = true;
      r.error_code = f[11];
    } else {
      r.cate_rmse = std::stod(f[8]);
      r.ate_bias = std::stod(f[9]);
      if (!f[10].empty()) r.impute_mae = std::stod(f[10]);
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::string convergence_to_csv(const std::vector<ConvergenceRow>& rows) {
  std::ostringstream out;
  out << "train_size,scenario,config,family,variant,imputer,base_learner,"
         "cate_rmse,error\n";
  for (const auto& row : rows) {
    const auto& r = row.record;
    out << row.train_size << ',' << r.dataset.scenario << ',' << r.dataset.config
        << ',' << r.method.family << ',' << r.method.variant << ','
        << r.method.imputer << ',' << r.method.base_learner << ',';
    if (!r.failed) {
      out << format_double(r.cate_rmse) << ",\n";
    } else {
      std::string err = r.error_code;
      for (auto& c : err)
        if (c == ',' || c == '\n') c = ';';
      out << ',' << err << "\n";
    }
  }
  return out.str();
}

void render_report(const BenchReport& report, const std::string& out_dir,
                   bool allow_missing) {
  std::filesystem::create_directories(out_dir);
  const auto path = [&](const char* name) {
    return (std::filesystem::path(out_dir) / name).string();
  };

  write_file_atomic(path("metrics.csv"), metrics_to_csv(report.records));

  if (report.records.empty()) {
    write_file_atomic(path("borda.csv"), "method,mean_rank,rank_stderr\n");
    write_file_atomic(path("borda.md"),
                      "| method | mean rank | rank stderr |\n|---|---|---|\n");
    write_file_atomic(path("winrates.csv"), "method,top1,top3,top5\n");
  } else {
    const auto table = borda_rank(report.records, RankMetric::CateRmse, allow_missing);
    write_file_atomic(path("borda.csv"), rank_table_csv(table));
    write_file_atomic(path("borda.md"), rank_table_markdown(table));
    write_file_atomic(path("winrates.csv"), win_rates_csv(table));
  }

  if (!report.convergence.empty())
    write_file_atomic(path("convergence.csv"), convergence_to_csv(report.convergence));

  nlohmann::ordered_json prov;
  prov["config_hash"] = hex64(fnv1a(report.config_json));
  prov["seed"] = report.seed;
  prov["version"] = kToolkitVersion;
  write_file_atomic(path("provenance.json"), prov.dump(2) + "\n");
}

}  // namespace survhte
