#include "adacong/runrecord.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace adacong::harness {

void RunRecord::log(std::int64_t step, std::string split, std::string metric, double value) {
  series.push_back({step, std::move(split), std::move(metric), value});
}

double RunRecord::final_value(const std::string& metric, const std::string& split) const {
  for (auto it = series.rbegin(); it != series.rend(); ++it) {
    if (it->metric == metric && (split.empty() || it->split == split)) return it->value;
  }
  throw std::out_of_range("run " + run_id + " has no metric '" + metric + "'");
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  // Shortest representation that round-trips a double.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, value);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == value) return buf;
  }
  return buf;
}

void write_run_csv(const RunRecord& record, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "run_id,seed,step,split,metric,value\n";
  for (const auto& row : record.series) {
    out << record.run_id << ',' << record.seed << ',' << row.step << ',' << row.split << ','
        << row.metric << ',' << format_double(row.value) << '\n';
  }
}

std::vector<RunRecord> read_run_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  if (line != "run_id,seed,step,split,metric,value") {
    throw std::runtime_error(path.string() + ": unexpected CSV header '" + line + "'");
  }
  std::vector<RunRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string run_id, seed_text, step_text, split, metric, value_text;
    if (!std::getline(ss, run_id, ',') || !std::getline(ss, seed_text, ',') ||
        !std::getline(ss, step_text, ',') || !std::getline(ss, split, ',') ||
        !std::getline(ss, metric, ',') || !std::getline(ss, value_text)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": malformed CSV row");
    }
    if (records.empty() || records.back().run_id != run_id) {
      RunRecord r;
      r.run_id = run_id;
      r.seed = std::stoull(seed_text);
      records.push_back(std::move(r));
    }
    MetricRow row;
    row.step = std::stoll(step_text);
    row.split = split;
    row.metric = metric;
    row.value = std::stod(value_text);
    records.back().series.push_back(std::move(row));
  }
  return records;
}

std::string content_hash(const std::string& text) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace adacong::harness
