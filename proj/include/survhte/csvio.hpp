#pragma once

#include <string>
#include <vector>

#include "survhte/datagen.hpp"
#include "survhte/impute.hpp"

namespace survhte {

// Numbers are written with 17 significant digits, enough for an exact
// round trip of any double.
std::string format_double(double v);

// Splits one line on commas; fields in this format never contain commas.
std::vector<std::string> split_csv_line(const std::string& line);

// Header: id,x1,x2,x3,x4,x5,u1,u2,w,obs_time,event,t0,t1,cate_true
std::string dataset_to_csv(const SyntheticDataset& dataset);

// Parses the columns back; scenario/config/seed metadata is not part of the
// file and is left at defaults.
SyntheticDataset dataset_from_csv(const std::string& text);

// Header: id,method,surrogate,floored
std::string imputed_to_csv(const std::vector<ImputedOutcome>& rows);

// Header: id,tau_hat,tau_true,method,variant,imputer,base_learner
struct CateRow {
  std::size_t id = 0;
  double tau_hat = 0.0;
  double tau_true = 0.0;
  std::string method;
  std::string variant;
  std::string imputer;
  std::string base_learner;
};

std::string cate_to_csv(const std::vector<CateRow>& rows);

// Writes to a temporary file beside `path` and renames it into place, so a
// crash never leaves a partially written file at `path`.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace survhte
