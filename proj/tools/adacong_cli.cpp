#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adacong/harness.hpp"

namespace fs = std::filesystem;
using adacong::harness::ConfigError;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailure = 1;
constexpr int kExitConfigError = 2;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  for (char c : text) {
    if (c == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else {
      item.push_back(c);
    }
  }
  if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split_list(text)) {
    try {
      seeds.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw ConfigError("--seeds: '" + item + "' is not a non-negative integer");
    }
  }
  return seeds;
}

fs::path resolve_out_dir(const std::string& cli_out, const std::string& config_out,
                         const std::string& leaf) {
  if (!cli_out.empty()) return cli_out;
  if (!config_out.empty()) return config_out;
  return adacong::harness::default_out_root() / leaf;
}

int do_run(const std::string& config_path, const std::string& seeds_text,
           const std::string& out_text, int jobs_cli) {
  auto config = adacong::harness::parse_config_file(config_path);
  if (!seeds_text.empty()) adacong::harness::override_seeds(config, parse_seed_list(seeds_text));
  const int jobs = jobs_cli > 0 ? jobs_cli : config.jobs;
  const fs::path out = resolve_out_dir(out_text, config.out_dir, config.experiment);

  const auto result = adacong::harness::run_all(config, out, jobs);
  std::cout << "wrote " << result.records.size() << " run(s) to " << out.string() << "\n";
  for (const auto& failure : result.failures) {
    std::cerr << "run failed: " << failure << "\n";
  }
  return result.failures.empty() ? kExitOk : kExitRunFailure;
}

int do_sweep(const std::string& config_path, const std::string& param,
             const std::string& values_text, const std::string& seeds_text,
             const std::string& out_text, int jobs_cli) {
  auto config = adacong::harness::parse_config_file(config_path);
  if (!seeds_text.empty()) adacong::harness::override_seeds(config, parse_seed_list(seeds_text));
  const auto values = split_list(values_text);
  if (values.empty()) throw ConfigError("--values: expected a non-empty comma list");
  const int jobs = jobs_cli > 0 ? jobs_cli : config.jobs;
  const fs::path out = resolve_out_dir(out_text, config.out_dir,
                                       config.experiment + "_sweep_" + param);

  const auto result = adacong::harness::run_sweep(config, param, values, out, jobs);
  std::cout << "sweep report: " << result.report_path.string() << "\n";
  for (const auto& failure : result.failures) {
    std::cerr << "run failed: " << failure << "\n";
  }
  return result.failures.empty() ? kExitOk : kExitRunFailure;
}

int do_render(const std::string& dir, std::string metric, const std::string& split,
              const std::string& out_text) {
  std::vector<adacong::harness::RunRecord> records;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    const auto name = entry.path().filename().string();
    if (name == "all_runs.csv" || name == "summary.csv" || name == "sweep_report.csv") {
      continue;
    }
    for (auto& rec : adacong::harness::read_run_csv(entry.path())) {
      records.push_back(std::move(rec));
    }
  }
  if (records.empty()) {
    throw ConfigError("render: no per-run CSV files under " + dir);
  }
  if (metric.empty()) {
    // Prefer the gridworld learning curve; fall back to accuracy.
    metric = "episode_reward";
    bool found = false;
    for (const auto& row : records.front().series) {
      if (row.metric == metric) found = true;
    }
    if (!found) metric = "accuracy";
  }
  const fs::path out = out_text.empty() ? fs::path(dir) / (metric + ".svg") : fs::path(out_text);
  adacong::harness::render_curves(records, metric, split, out);
  std::cout << "wrote " << out.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adacong: conformal-guidance experiment runner"};
  app.require_subcommand(1);

  std::string config_path, seeds_text, out_text, param, values_text, metric, split, dir;
  int jobs = 0;

  auto* run = app.add_subcommand("run", "execute every (baseline x seed) cell of a config");
  run->add_option("config", config_path, "JSON experiment config")->required();
  run->add_option("--seeds", seeds_text, "comma-separated seed override");
  run->add_option("--out", out_text, "output directory");
  run->add_option("--jobs", jobs, "worker threads");

  auto* sweep = app.add_subcommand("sweep", "run the config once per parameter value");
  sweep->add_option("config", config_path, "JSON experiment config")->required();
  sweep->add_option("--param", param, "parameter name inside params (dotted path)")
      ->required();
  sweep->add_option("--values", values_text, "comma-separated values")->required();
  sweep->add_option("--seeds", seeds_text, "comma-separated seed override");
  sweep->add_option("--out", out_text, "output directory");
  sweep->add_option("--jobs", jobs, "worker threads");

  auto* render = app.add_subcommand("render", "render learning-curve SVG from run CSVs");
  render->add_option("dir", dir, "directory of per-run CSV files")->required();
  render->add_option("--metric", metric, "metric to plot (default: auto)");
  render->add_option("--split", split, "split filter (train/test; default: any)");
  render->add_option("--out", out_text, "output SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (run->parsed()) return do_run(config_path, seeds_text, out_text, jobs);
    if (sweep->parsed()) return do_sweep(config_path, param, values_text, seeds_text,
                                         out_text, jobs);
    return do_render(dir, metric, split, out_text);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRunFailure;
  }
}
