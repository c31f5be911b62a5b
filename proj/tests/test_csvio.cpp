#include "survhte/csvio.hpp"

#include <cmath>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "survhte/rng.hpp"

using namespace survhte;

TEST_CASE("doubles survive the text round trip bit for bit") {
  rng::Stream stream(1, 0, 0);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(stream.uniform() - 0.5, static_cast<int>(stream.next_u64() % 600) - 300);
    const std::string s = format_double(v);
    const double back = std::stod(s);
    CHECK(back == v);
  }
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(format_double(kNeverCensored) == "inf");
}

TEST_CASE("dataset CSV round trip") {
  DatasetSpec spec;
  spec.scenario = Scenario::A;
  spec.n = 200;
  spec.seed = 42;
  auto dataset = build_dataset(spec);
  const std::string csv = dataset_to_csv(dataset);
  CHECK(csv.rfind("id,x1,x2,x3,x4,x5,w,obs_time", 0) == std::string::npos);
  CHECK(csv.rfind("id,x1,x2,x3,x4,x5,u1,u2,w,obs_time,event,t0,t1,cate_true\n", 0) == 0);

  auto back = dataset_from_csv(csv);
  REQUIRE(back.units.size() == dataset.units.size());
  for (std::size_t i = 0; i < dataset.units.size(); ++i) {
    const Unit& a = dataset.units[i];
    const Unit& b = back.units[i];
    for (int j = 0; j < 5; ++j) CHECK(a.latents.x[j] == b.latents.x[j]);
    for (int j = 0; j < 2; ++j) CHECK(a.latents.u[j] == b.latents.u[j]);
    CHECK(a.w == b.w);
    CHECK(a.obs_time == b.obs_time);
    CHECK(a.event == b.event);
    CHECK(a.t0 == b.t0);
    CHECK(a.t1 == b.t1);
    CHECK(a.cate_true == b.cate_true);
  }
  // serialization is a pure function of the rows
  CHECK(dataset_to_csv(back) == csv);
}

TEST_CASE("malformed input is rejected with the line identified") {
  CHECK_THROWS_WITH_AS(dataset_from_csv(""), "csv: empty input", std::runtime_error);
  CHECK_THROWS(dataset_from_csv("wrong,header\n"));
  const std::string header = "id,x1,x2,x3,x4,x5,u1,u2,w,obs_time,event,t0,t1,cate_true\n";
  CHECK_THROWS_WITH_AS(dataset_from_csv(header + "0,1,2\n"),
                       "csv: expected 14 fields on line 2", std::runtime_error);
  CHECK_THROWS_WITH_AS(
      dataset_from_csv(header + "0,oops,0,0,0,0,0,0,0,1,1,1,1,0\n"),
      "csv: bad numeric field 'oops' on line 2", std::runtime_error);
}

TEST_CASE("imputation and effect tables use the documented headers") {
  std::vector<ImputedOutcome> rows{{3, 1.5, ImputeMethod::Margin, true},
                                   {4, 2.0, ImputeMethod::PseudoObs, false}};
  const std::string icsv = imputed_to_csv(rows);
  CHECK(icsv.rfind("id,method,surrogate,floored\n", 0) == 0);
  CHECK(icsv.find("3,margin,1.5,1\n") != std::string::npos);
  CHECK(icsv.find("4,pseudo-obs,2,0\n") != std::string::npos);

  std::vector<CateRow> cate_rows{{7, 0.5, 0.25, "imputed-meta", "T", "margin", "lasso"}};
  const std::string ccsv = cate_to_csv(cate_rows);
  CHECK(ccsv.rfind("id,tau_hat,tau_true,method,variant,imputer,base_learner\n", 0) == 0);
  CHECK(ccsv.find("7,0.5,0.25,imputed-meta,T,margin,lasso\n") != std::string::npos);
}

TEST_CASE("atomic write leaves either the old file or the new one") {
  const auto dir = std::filesystem::temp_directory_path() / "survhte_csvio_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "out.csv").string();
  write_file_atomic(path, "first\n");
  CHECK(read_file(path) == "first\n");
  write_file_atomic(path, "second\n");
  CHECK(read_file(path) == "second\n");
  CHECK(!std::filesystem::exists(path + ".tmp"));
  std::filesystem::remove_all(dir);
}
