#include "survhte/bench.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "survhte/csvio.hpp"
#include "survhte/rng.hpp"

using namespace survhte;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.scenarios = {Scenario::A};
  c.configs = {CausalConfig{}};  // balanced randomized assignment
  c.n_train = 200;
  c.n_val = 100;
  c.n_test = 100;
  c.repeats = 1;
  c.seed = 11;
  c.pool_size = 600;
  c.threads = 2;
  MethodSpec s_cell;
  s_cell.family = CateFamily::ImputedMeta;
  s_cell.variant = CateVariant::S;
  c.roster = {s_cell};
  return c;
}

CateModel constant_model(double level, int d) {
  // a residualized linear model with a zero slope predicts `level` everywhere
  CateModel m;
  m.family = CateFamily::DoubleMl;
  m.theta = Eigen::VectorXd::Zero(d + 1);
  m.theta[0] = level;
  return m;
}

}  // namespace

TEST_CASE("config JSON round trip and validation") {
  const std::string text = R"({
    "scenarios": ["A", "C"],
    "configs": ["RCT-50", "OBS-CPS-InfC"],
    "n_train": 100, "n_val": 50, "n_test": 50,
    "repeats": 3, "seed": 9, "estimand": "rmst", "horizon": 2.5,
    "pool_size": 400, "matching_k": 7,
    "roster": [
      {"family": "imputed-meta", "variant": "T", "imputer": "margin", "base_learner": "lasso"},
      {"family": "double-ml", "imputer": "pseudo-obs", "base_learner": "forest"},
      {"family": "surv-meta", "variant": "matching"}
    ]
  })";
  const auto c = config_from_json(text);
  CHECK(c.scenarios.size() == 2);
  CHECK(c.configs[1].informative_censoring);
  CHECK(c.repeats == 3);
  CHECK(c.horizon_rule.kind == HorizonRule::Kind::Fixed);
  CHECK(c.horizon_rule.value == 2.5);
  CHECK(c.roster.size() == 3);
  CHECK(c.roster[1].family == CateFamily::DoubleMl);
  CHECK(c.roster[2].variant == CateVariant::Matching);

  // canonical form is stable under a round trip
  const auto canon = config_to_json(c);
  CHECK(config_to_json(config_from_json(canon)) == canon);

  CHECK_THROWS(config_from_json("{not json"));
  CHECK_THROWS(config_from_json(R"({"scenarios":[],"configs":["RCT-50"]})"));
  auto bad = small_config();
  bad.repeats = 0;
  CHECK_THROWS(bad.validate());
  bad = small_config();
  bad.n_train = 1000;  // 1000+100+100 > 600
  CHECK_THROWS(bad.validate());
}

TEST_CASE("splits are disjoint, sized, and keyed") {
  for (std::uint64_t key : {0ULL, 1ULL, 77ULL}) {
    const auto s = make_split(1000, 500, 250, 250, 42, key);
    CHECK(s.train.size() == 500);
    CHECK(s.val.size() == 250);
    CHECK(s.test.size() == 250);
    std::set<std::size_t> seen(s.train.begin(), s.train.end());
    seen.insert(s.val.begin(), s.val.end());
    seen.insert(s.test.begin(), s.test.end());
    CHECK(seen.size() == 1000);
  }
  CHECK(make_split(1000, 500, 250, 250, 42, 1).train !=
        make_split(1000, 500, 250, 250, 42, 2).train);
  CHECK(make_split(1000, 500, 250, 250, 42, 1).train ==
        make_split(1000, 500, 250, 250, 42, 1).train);
  CHECK_THROWS(make_split(100, 90, 10, 10, 0, 0));
}

TEST_CASE("validation picks the smallest-error candidate, ties keep the first") {
  const int n = 50;
  Eigen::MatrixXd val_x = Eigen::MatrixXd::Random(n, 2);
  std::vector<double> tau_true(n, 1.0);
  CateModel close = constant_model(1.1, 2);
  CateModel far = constant_model(1.3, 2);
  CateModel far_twin = constant_model(1.3, 2);

  CHECK(select_model({&far}, val_x, tau_true) == 0);
  CHECK(select_model({&far, &close}, val_x, tau_true) == 1);
  CHECK(select_model({&far, &far_twin, &close}, val_x, tau_true) == 2);
  CHECK(select_model({&far, &far_twin}, val_x, tau_true) == 0);
  CHECK_THROWS(select_model({}, val_x, tau_true));
}

TEST_CASE("dataset export") {
  const auto dir = std::filesystem::temp_directory_path() / "survhte_bench_export";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "a.csv").string();

  DatasetSpec bad;
  bad.n = 0;
  CHECK_THROWS(export_dataset(bad, path));
  CHECK(!std::filesystem::exists(path));

  DatasetSpec spec;
  spec.scenario = Scenario::B;
  spec.n = 50;
  spec.seed = 5;
  export_dataset(spec, path);
  const auto text = read_file(path);
  CHECK(text.rfind("id,x1,x2,x3,x4,x5,u1,u2,w,obs_time,event,t0,t1,cate_true\n", 0) == 0);
  const auto back = dataset_from_csv(text);
  CHECK(back.units.size() == 50);
  CHECK(dataset_to_csv(back) == text);
  std::filesystem::remove_all(dir);
}

TEST_CASE("single-cell run produces one finite record") {
  auto config = small_config();
  auto report = run_benchmark(config);
  REQUIRE(report.records.size() == 1);
  const auto& r = report.records[0];
  CHECK(!r.failed);
  CHECK(std::isfinite(r.cate_rmse));
  CHECK(std::isfinite(r.ate_bias));
  CHECK(r.impute_mae.has_value());
  CHECK(r.selected);
  CHECK(r.dataset.scenario == "A");
  CHECK(r.method.family == "imputed-meta");
}

TEST_CASE("same configuration twice gives byte-identical metrics") {
  auto config = small_config();
  config.repeats = 2;
  MethodSpec dml;
  dml.family = CateFamily::DoubleMl;
  config.roster.push_back(dml);
  const auto a = run_benchmark(config);
  const auto b = run_benchmark(config);
  CHECK(a.records.size() == 4);
  CHECK(metrics_to_csv(a.records) == metrics_to_csv(b.records));
}

TEST_CASE("a failing cell is recorded and the run continues") {
  auto config = small_config();
  MethodSpec t_cell;
  t_cell.family = CateFamily::ImputedMeta;
  t_cell.variant = CateVariant::T;
  config.roster.push_back(t_cell);

  DatasetSpec spec;
  spec.scenario = Scenario::A;
  spec.n = config.pool_size;
  spec.seed = 3;
  auto pool = build_dataset(spec);
  for (auto& u : pool.units) u.w = 1;  // the control arm vanishes

  const DatasetKey key{"A", "RCT-50", 0};
  const auto records = run_cells(config, pool, key, 0, 0);
  REQUIRE(records.size() == 2);
  CHECK(!records[0].failed);
  CHECK(records[1].failed);
  CHECK(records[1].error_code == "cate: control arm is empty");
  const auto csv = metrics_to_csv(records);
  CHECK(csv.find("cate: control arm is empty") != std::string::npos);
}

TEST_CASE("validation and test outcomes never reach the fitted models") {
  auto config = small_config();
  MethodSpec dml;
  dml.family = CateFamily::DoubleMl;
  dml.imputer = ImputeMethod::IpcwT;
  config.roster.push_back(dml);

  DatasetSpec spec;
  spec.scenario = Scenario::A;
  spec.n = config.pool_size;
  spec.seed = 21;
  const auto pool = build_dataset(spec);
  const DatasetKey key{"A", "RCT-50", 0};
  const auto base = run_cells(config, pool, key, 0, 5);

  // scrambling outcomes outside the training rows must not move any metric
  auto scrambled = pool;
  const auto s = make_split(pool.units.size(), config.n_train, config.n_val,
                            config.n_test, config.seed, rng::mix_key(5, 0));
  std::set<std::size_t> train_rows(s.train.begin(), s.train.end());
  for (std::size_t i = 0; i < scrambled.units.size(); ++i) {
    if (train_rows.count(i)) continue;
    scrambled.units[i].obs_time = 1e6 + static_cast<double>(i);
    scrambled.units[i].event = i % 2 == 0;
  }
  const auto after = run_cells(config, scrambled, key, 0, 5);
  CHECK(metrics_to_csv(base) == metrics_to_csv(after));
}

TEST_CASE("convergence sweep") {
  auto config = small_config();
  config.n_val = 100;
  config.n_test = 100;

  SUBCASE("one size gives one row per cell") {
    const auto report = convergence_run(config, {50});
    REQUIRE(report.convergence.size() == 1);
    CHECK(report.convergence[0].train_size == 50);
    CHECK(!report.convergence[0].record.failed);
  }
  SUBCASE("duplicate sizes draw different training sets") {
    const auto report = convergence_run(config, {100, 100});
    REQUIRE(report.convergence.size() == 2);
    CHECK(report.convergence[0].record.cate_rmse !=
          report.convergence[1].record.cate_rmse);
  }
  SUBCASE("size exceeding the pool is rejected") {
    CHECK_THROWS(convergence_run(config, {100000}));
    CHECK_THROWS(convergence_run(config, {}));
  }
}

TEST_CASE("more training data does not hurt the simplest learner") {
  ExperimentConfig config;
  config.scenarios = {Scenario::C};
  config.configs = {CausalConfig{}};
  config.n_val = 500;
  config.n_test = 500;
  config.seed = 31;
  config.pool_size = 12000;
  MethodSpec s_cell;
  config.roster = {s_cell};
  const auto report = convergence_run(config, {100, 10000});
  REQUIRE(report.convergence.size() == 2);
  CHECK(report.convergence[1].record.cate_rmse <=
        report.convergence[0].record.cate_rmse);
}

TEST_CASE("report rendering") {
  const auto dir = std::filesystem::temp_directory_path() / "survhte_bench_report";
  std::filesystem::remove_all(dir);

  SUBCASE("empty roster yields headers-only files") {
    BenchReport report;
    report.seed = 4;
    report.config_json = "{}";
    render_report(report, dir.string());
    CHECK(read_file((dir / "metrics.csv").string()) ==
          "scenario,config,repeat,family,variant,imputer,base_learner,selected,"
          "cate_rmse,ate_bias,impute_mae,error\n");
    CHECK(read_file((dir / "borda.csv").string()) == "method,mean_rank,rank_stderr\n");
    CHECK(read_file((dir / "winrates.csv").string()) == "method,top1,top3,top5\n");
    const auto prov = read_file((dir / "provenance.json").string());
    CHECK(prov.find("config_hash") != std::string::npos);
    CHECK(prov.find("\"seed\": 4") != std::string::npos);
  }

  SUBCASE("records produce ranking files") {
    auto config = small_config();
    MethodSpec dml;
    dml.family = CateFamily::DoubleMl;
    config.roster.push_back(dml);
    const auto report = run_benchmark(config);
    render_report(report, dir.string());
    const auto borda = read_file((dir / "borda.md").string());
    CHECK(borda.find("| method | mean rank | rank stderr |") != std::string::npos);
    CHECK(borda.find("imputed-meta:S") != std::string::npos);
    CHECK(!std::filesystem::exists(dir / "metrics.csv.tmp"));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("thread-count fallback chain") {
  CHECK(resolve_threads(3) == 3);
  setenv("SURVHTE_THREADS", "5", 1);
  CHECK(resolve_threads(0) == 5);
  unsetenv("SURVHTE_THREADS");
  CHECK(resolve_threads(0) >= 1);
}
