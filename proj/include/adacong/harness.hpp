#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adacong/controller.hpp"
#include "adacong/kd.hpp"
#include "adacong/runrecord.hpp"
#include "adacong/ssl.hpp"

namespace adacong::harness {

// Raised for malformed configuration (maps to exit code 2 in the CLI).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A parsed, validated experiment configuration. Exactly one of the typed
// configs below is meaningful, selected by `experiment`.
struct HarnessConfig {
  std::string experiment;  // "kd" | "ssl" | "gridworld"
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> arms;  // baselines (kd/ssl) or modes (gridworld)
  std::string out_dir;            // optional; may be empty
  int jobs = 1;

  kd::KdConfig kd;
  ssl::SslConfig ssl;
  rl::GridworldConfig gridworld;

  std::string canonical_json;  // effective config, canonical form
  std::string config_hash;     // hash of canonical_json
};

HarnessConfig parse_config_file(const std::filesystem::path& path);
HarnessConfig parse_config_text(const std::string& text, const std::string& source_name);

// Apply CLI overrides, then recompute the canonical form and hash.
void override_seeds(HarnessConfig& config, const std::vector<std::uint64_t>& seeds);

struct ArmRecord {
  std::string arm;
  RunRecord record;
};

struct RunOutput {
  std::vector<ArmRecord> records;           // successful runs, ordered by run_id
  std::vector<std::string> failures;        // "<run_id>: <error>"
  std::filesystem::path out_dir;
};

// Executes every (arm x seed) cell in a bounded worker pool, writing one CSV
// per run plus all_runs.csv, summary.csv and a config snapshot. Failed cells
// are recorded and the remaining cells still run.
RunOutput run_all(const HarnessConfig& config, const std::filesystem::path& out_dir,
                  int jobs);

// Single cell, used by run_all and directly by tests.
RunRecord run_cell(const HarnessConfig& config, const std::string& arm, std::uint64_t seed);

std::string run_id_for(const HarnessConfig& config, const std::string& arm,
                       std::uint64_t seed);

// Mean and sample standard deviation of each summary metric per arm.
struct SummaryRow {
  std::string arm;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

std::vector<SummaryRow> summarize(const std::vector<ArmRecord>& records);
void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);

// Merged 5-column CSV: run_id,seed,step,metric,value (split folded into the
// metric name as "<split>_<metric>").
void write_merged_csv(const std::vector<ArmRecord>& records,
                      const std::filesystem::path& path);

// One run per swept value; each value writes into <out>/<param>=<value>/ and
// the per-value summaries are concatenated into sweep_report.csv.
struct SweepOutput {
  std::vector<std::string> failures;
  std::filesystem::path report_path;
};

SweepOutput run_sweep(const HarnessConfig& base, const std::string& parameter,
                      const std::vector<std::string>& values,
                      const std::filesystem::path& out_dir, int jobs);

// Default output root: $ADACONG_OUT or "runs".
std::filesystem::path default_out_root();

// Strips the trailing "-s<seed>" from a run id, leaving the arm-level group.
std::string group_of_run_id(const std::string& run_id);

// Learning-curve SVG: one mean line per group with a +-1 std band across
// seeds. All records must contain the requested metric.
void render_curves(const std::vector<RunRecord>& records, const std::string& metric,
                   const std::string& split, const std::filesystem::path& out_path);

}  // namespace adacong::harness
