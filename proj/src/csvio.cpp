#include "survhte/csvio.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace survhte {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

namespace {

double parse_double(const std::string& field, std::size_t line_no) {
  if (field == "inf") return kNeverCensored;
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto res = std::from_chars(field.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw std::runtime_error("csv: bad numeric field '" + field + "' on line " +
                             std::to_string(line_no));
  return v;
}

constexpr const char* kDatasetHeader =
    "id,x1,x2,x3,x4,x5,u1,u2,w,obs_time,event,t0,t1,cate_true";

}  // namespace

std::string dataset_to_csv(const SyntheticDataset& dataset) {
  std::ostringstream out;
  out << kDatasetHeader << "\n";
  for (std::size_t i = 0; i < dataset.units.size(); ++i) {
    const Unit& u = dataset.units[i];
    out << i;
    for (double x : u.latents.x) out << ',' << format_double(x);
    for (double v : u.latents.u) out << ',' << format_double(v);
    out << ',' << u.w << ',' << format_double(u.obs_time) << ','
        << (u.event ? 1 : 0) << ',' << format_double(u.t0) << ','
        << format_double(u.t1) << ',' << format_double(u.cate_true) << "\n";
  }
  return out.str();
}

SyntheticDataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kDatasetHeader)
    throw std::runtime_error("csv: unexpected header '" + line + "'");

  SyntheticDataset dataset;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 14)
      throw std::runtime_error("csv: expected 14 fields on line " +
                               std::to_string(line_no));
    Unit u;
    for (int j = 0; j < 5; ++j) u.latents.x[j] = parse_double(fields[1 + j], line_no);
    for (int j = 0; j < 2; ++j) u.latents.u[j] = parse_double(fields[6 + j], line_no);
    u.w = static_cast<int>(parse_double(fields[8], line_no));
    u.obs_time = parse_double(fields[9], line_no);
    u.event = parse_double(fields[10], line_no) != 0.0;
    u.t0 = parse_double(fields[11], line_no);
    u.t1 = parse_double(fields[12], line_no);
    u.cate_true = parse_double(fields[13], line_no);
    dataset.units.push_back(u);
  }
  return dataset;
}

std::string imputed_to_csv(const std::vector<ImputedOutcome>& rows) {
  std::ostringstream out;
  out << "id,method,surrogate,floored\n";
  for (const auto& r : rows) {
    out << r.unit_id << ',' << to_string(r.method) << ','
        << format_double(r.surrogate) << ',' << (r.floored ? 1 : 0) << "\n";
  }
  return out.str();
}

std::string cate_to_csv(const std::vector<CateRow>& rows) {
  std::ostringstream out;
  out << "id,tau_hat,tau_true,method,variant,imputer,base_learner\n";
  for (const auto& r : rows) {
    out << r.id << ',' << format_double(r.tau_hat) << ','
        << format_double(r.tau_true) << ',' << r.method << ',' << r.variant << ','
        << r.imputer << ',' << r.base_learner << "\n";
  }
  return out.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw std::runtime_error("rename '" + tmp + "' -> '" + path +
                             "' failed: " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace survhte
