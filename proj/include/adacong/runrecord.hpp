#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace adacong::harness {

// One logged value. `split` distinguishes train/test/cal series and may be
// empty for quantities that belong to no split (weights, set sizes, ...).
struct MetricRow {
  std::int64_t step = 0;
  std::string split;
  std::string metric;
  double value = 0.0;
};

// A single seeded experiment trace plus its summary statistics. Re-running
// with the same config hash and seed reproduces the series exactly.
struct RunRecord {
  std::string run_id;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<MetricRow> series;
  std::map<std::string, double> summary;

  void log(std::int64_t step, std::string split, std::string metric, double value);

  // Last logged value of metric (optionally restricted to a split).
  double final_value(const std::string& metric, const std::string& split = "") const;
};

// Deterministic shortest-round-trip formatting; identical inputs produce
// byte-identical text.
std::string format_double(double value);

// Per-run CSV, schema: run_id,seed,step,split,metric,value
void write_run_csv(const RunRecord& record, const std::filesystem::path& path);
std::vector<RunRecord> read_run_csv(const std::filesystem::path& path);

// Stable 64-bit content hash (FNV-1a), hex encoded.
std::string content_hash(const std::string& text);

}  // namespace adacong::harness
