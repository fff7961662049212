#include "adacong/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <map>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace adacong::harness {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

const json& member(const json& obj, const std::string& where, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where, std::string("missing required key '") + key + "'");
  return *it;
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) fail(where, "unknown key '" + item.key() + "'");
  }
}

double get_double(const json& obj, const std::string& where, const char* key, double def,
                  double lo, double hi) {
  auto it = obj.find(key);
  if (it == obj.end()) return def;
  if (!it->is_number()) fail(where + "." + key, "expected a number");
  const double v = it->get<double>();
  if (!std::isfinite(v) || v < lo || v > hi) {
    fail(where + "." + key, "value " + std::to_string(v) + " outside [" +
                                std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return v;
}

std::size_t get_size(const json& obj, const std::string& where, const char* key,
                     std::size_t def, std::size_t lo, std::size_t hi) {
  auto it = obj.find(key);
  if (it == obj.end()) return def;
  if (!it->is_number_unsigned()) fail(where + "." + key, "expected a non-negative integer");
  const auto v = it->get<std::size_t>();
  if (v < lo || v > hi) {
    fail(where + "." + key, "value " + std::to_string(v) + " outside [" +
                                std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return v;
}

bool get_bool(const json& obj, const std::string& where, const char* key, bool def) {
  auto it = obj.find(key);
  if (it == obj.end()) return def;
  if (!it->is_boolean()) fail(where + "." + key, "expected a boolean");
  return it->get<bool>();
}

std::string get_string(const json& obj, const std::string& where, const char* key,
                       const std::string& def) {
  auto it = obj.find(key);
  if (it == obj.end()) return def;
  if (!it->is_string()) fail(where + "." + key, "expected a string");
  return it->get<std::string>();
}

kd::ModelSpec parse_model(const json& obj, const std::string& where,
                          const kd::ModelSpec& def) {
  check_keys(obj, where, {"hidden", "epochs", "learning_rate", "weight_decay", "batch_size"});
  kd::ModelSpec spec = def;
  spec.hidden = get_size(obj, where, "hidden", def.hidden, 0, 4096);
  spec.epochs = get_size(obj, where, "epochs", def.epochs, 1, 100000);
  spec.learning_rate = get_double(obj, where, "learning_rate", def.learning_rate, 1e-8, 10.0);
  spec.weight_decay = get_double(obj, where, "weight_decay", def.weight_decay, 0.0, 1.0);
  spec.batch_size = get_size(obj, where, "batch_size", def.batch_size, 1, 100000);
  return spec;
}

void parse_kd_params(const json& p, HarnessConfig& config) {
  const std::string where = "$.params";
  check_keys(p, where,
             {"num_classes", "dim", "separation", "within_sigma", "n_pool", "n_test",
              "n_teacher", "shift_sigma", "shift_fraction", "train_fraction", "cal_fraction",
              "teacher", "student", "teacher_on_train", "alpha", "gamma", "kl_temperature",
              "lambda_task", "lambda_guide"});
  kd::KdConfig& c = config.kd;
  c.num_classes = get_size(p, where, "num_classes", c.num_classes, 2, 1000);
  c.dim = get_size(p, where, "dim", c.dim, 1, 4096);
  c.separation = get_double(p, where, "separation", c.separation, 0.0, 1e3);
  c.within_sigma = get_double(p, where, "within_sigma", c.within_sigma, 0.0, 1e3);
  c.n_pool = get_size(p, where, "n_pool", c.n_pool, 10, 10000000);
  c.n_test = get_size(p, where, "n_test", c.n_test, 10, 10000000);
  c.n_teacher = get_size(p, where, "n_teacher", c.n_teacher, 10, 10000000);
  c.shift_sigma = get_double(p, where, "shift_sigma", c.shift_sigma, 0.0, 1e3);
  c.shift_fraction = get_double(p, where, "shift_fraction", c.shift_fraction, 0.0, 1.0);
  c.split.train_fraction = get_double(p, where, "train_fraction", c.split.train_fraction,
                                      0.01, 0.99);
  c.split.cal_fraction = get_double(p, where, "cal_fraction", c.split.cal_fraction, 0.01,
                                    0.99);
  if (std::abs(c.split.train_fraction + c.split.cal_fraction - 1.0) > 1e-9) {
    fail(where, "train_fraction and cal_fraction must sum to 1");
  }
  if (auto it = p.find("teacher"); it != p.end()) {
    c.teacher = parse_model(*it, where + ".teacher", c.teacher);
  }
  if (auto it = p.find("student"); it != p.end()) {
    c.student = parse_model(*it, where + ".student", c.student);
  }
  c.teacher_on_train = get_bool(p, where, "teacher_on_train", c.teacher_on_train);
  c.alpha = get_double(p, where, "alpha", c.alpha, 1e-6, 1.0 - 1e-6);
  c.gamma = get_double(p, where, "gamma", c.gamma, 1e-6, 1e6);
  c.kl_temperature = get_double(p, where, "kl_temperature", c.kl_temperature, 1e-6, 1e3);
  c.lambda_task = get_double(p, where, "lambda_task", c.lambda_task, 0.0, 1e6);
  c.lambda_guide = get_double(p, where, "lambda_guide", c.lambda_guide, 0.0, 1e6);
}

void parse_ssl_params(const json& p, HarnessConfig& config) {
  const std::string where = "$.params";
  check_keys(p, where,
             {"num_classes", "dim", "separation", "within_sigma", "labeled_per_class",
              "n_unlabeled", "n_test", "hidden", "iterations", "batch_unlabeled",
              "learning_rate", "weight_decay", "alpha", "gamma", "confidence_threshold",
              "use_threshold", "lambda_u", "guide", "recalibrate_every", "sigma_weak",
              "sigma_strong", "drop_fraction", "eval_every"});
  ssl::SslConfig& c = config.ssl;
  c.num_classes = get_size(p, where, "num_classes", c.num_classes, 2, 1000);
  c.dim = get_size(p, where, "dim", c.dim, 1, 4096);
  c.separation = get_double(p, where, "separation", c.separation, 0.0, 1e3);
  c.within_sigma = get_double(p, where, "within_sigma", c.within_sigma, 0.0, 1e3);
  c.labeled_per_class = get_size(p, where, "labeled_per_class", c.labeled_per_class, 1,
                                 100000);
  c.n_unlabeled = get_size(p, where, "n_unlabeled", c.n_unlabeled, 10, 10000000);
  c.n_test = get_size(p, where, "n_test", c.n_test, 10, 10000000);
  c.hidden = get_size(p, where, "hidden", c.hidden, 0, 4096);
  c.iterations = get_size(p, where, "iterations", c.iterations, 1, 10000000);
  c.batch_unlabeled = get_size(p, where, "batch_unlabeled", c.batch_unlabeled, 1, 100000);
  c.learning_rate = get_double(p, where, "learning_rate", c.learning_rate, 1e-8, 10.0);
  c.weight_decay = get_double(p, where, "weight_decay", c.weight_decay, 0.0, 1.0);
  c.alpha = get_double(p, where, "alpha", c.alpha, 1e-6, 1.0 - 1e-6);
  c.gamma = get_double(p, where, "gamma", c.gamma, 1e-6, 1e6);
  c.confidence_threshold = get_double(p, where, "confidence_threshold",
                                      c.confidence_threshold, 0.0, 1.0);
  c.use_threshold = get_bool(p, where, "use_threshold", c.use_threshold);
  c.lambda_u = get_double(p, where, "lambda_u", c.lambda_u, 0.0, 1e6);
  const std::string guide = get_string(p, where, "guide", "ce");
  if (guide == "ce") c.guide = ssl::SslGuide::CrossEntropy;
  else if (guide == "mse") c.guide = ssl::SslGuide::MseLogits;
  else fail(where + ".guide", "expected 'ce' or 'mse', got '" + guide + "'");
  c.recalibrate_every = get_size(p, where, "recalibrate_every", c.recalibrate_every, 1,
                                 10000000);
  c.aug.sigma_weak = get_double(p, where, "sigma_weak", c.aug.sigma_weak, 0.0, 1e3);
  c.aug.sigma_strong = get_double(p, where, "sigma_strong", c.aug.sigma_strong, 0.0, 1e3);
  c.aug.drop_fraction = get_double(p, where, "drop_fraction", c.aug.drop_fraction, 0.0, 1.0);
  c.eval_every = get_size(p, where, "eval_every", c.eval_every, 1, 10000000);
}

void parse_gridworld_params(const json& p, HarnessConfig& config) {
  const std::string where = "$.params";
  check_keys(p, where,
             {"env", "episodes", "demo_episodes", "bc_smoothing", "learning_rate",
              "discount", "entropy_temp", "replay_capacity", "batch_size", "alpha",
              "calibration_size", "calibration_batch", "ema_smoothing",
              "epsilon_total_steps"});
  rl::GridworldConfig& c = config.gridworld;
  const std::string env = get_string(p, where, "env", "lava1");
  try {
    c.env = grid::variant_from_name(env);
  } catch (const std::invalid_argument& e) {
    fail(where + ".env", e.what());
  }
  // Lava 2 deliberately reuses the Lava 1 expert; the others are their own
  // demonstration source.
  c.il_source_env = c.env == grid::Variant::Lava2 ? grid::Variant::Lava1 : c.env;
  c.episodes = get_size(p, where, "episodes", c.episodes, 1, 1000000);
  c.demo_episodes = get_size(p, where, "demo_episodes", c.demo_episodes, 1, 1000000);
  c.bc_smoothing = get_double(p, where, "bc_smoothing", c.bc_smoothing, 0.0, 1e3);
  c.agent.learning_rate = get_double(p, where, "learning_rate", c.agent.learning_rate, 1e-8,
                                     1.0);
  c.agent.discount = get_double(p, where, "discount", c.agent.discount, 1e-6, 1.0 - 1e-9);
  c.agent.entropy_temp = get_double(p, where, "entropy_temp", c.agent.entropy_temp, 1e-6,
                                    1e3);
  c.agent.replay_capacity = get_size(p, where, "replay_capacity", c.agent.replay_capacity, 1,
                                     100000000);
  c.agent.batch_size = get_size(p, where, "batch_size", c.agent.batch_size, 1, 1000000);
  c.alpha = get_double(p, where, "alpha", c.alpha, 1e-6, 1.0 - 1e-6);
  c.calibration_size = get_size(p, where, "calibration_size", c.calibration_size, 1,
                                10000000);
  c.calibration_batch = get_size(p, where, "calibration_batch", c.calibration_batch, 1,
                                 10000000);
  if (c.calibration_batch > c.calibration_size) {
    fail(where, "calibration_batch exceeds calibration_size");
  }
  c.ema_smoothing = get_double(p, where, "ema_smoothing", c.ema_smoothing, 1e-9, 1.0);
  c.epsilon_total_steps = get_size(p, where, "epsilon_total_steps", 0, 0, ~0ull >> 1);
}

json canonicalize(const json& doc) {
  json out = doc;
  out.erase("out_dir");
  out.erase("jobs");
  return out;
}

std::string json_type_name(const json& v) { return v.type_name(); }

}  // namespace

HarnessConfig parse_config_text(const std::string& text, const std::string& source_name) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source_name + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(source_name + ": top level must be an object");

  const std::string where = "$";
  check_keys(doc, where,
             {"schema_version", "experiment", "seeds", "baselines", "modes", "out_dir",
              "jobs", "params"});

  const auto& version = member(doc, where, "schema_version");
  if (!version.is_number_integer() || version.get<int>() != 1) {
    fail(where + ".schema_version", "this build understands schema_version 1");
  }

  HarnessConfig config;
  config.experiment = member(doc, where, "experiment").get<std::string>();
  if (config.experiment != "kd" && config.experiment != "ssl" &&
      config.experiment != "gridworld") {
    fail(where + ".experiment", "expected 'kd', 'ssl' or 'gridworld', got '" +
                                    config.experiment + "'");
  }

  const auto& seeds = member(doc, where, "seeds");
  if (!seeds.is_array() || seeds.empty()) fail(where + ".seeds", "expected a non-empty array");
  std::set<std::uint64_t> seen;
  for (const auto& s : seeds) {
    if (!s.is_number_unsigned()) {
      fail(where + ".seeds", "expected non-negative integers, got " + json_type_name(s));
    }
    const auto v = s.get<std::uint64_t>();
    if (!seen.insert(v).second) {
      fail(where + ".seeds", "duplicate seed " + std::to_string(v));
    }
    config.seeds.push_back(v);
  }

  const bool has_baselines = doc.contains("baselines");
  const bool has_modes = doc.contains("modes");
  if (has_baselines == has_modes) {
    fail(where, "provide exactly one of 'baselines' or 'modes'");
  }
  const auto& arms = doc[has_baselines ? "baselines" : "modes"];
  if (!arms.is_array() || arms.empty()) {
    fail(where + (has_baselines ? ".baselines" : ".modes"), "expected a non-empty array");
  }
  for (const auto& arm : arms) {
    if (!arm.is_string()) {
      fail(where + (has_baselines ? ".baselines" : ".modes"), "entries must be strings");
    }
    config.arms.push_back(arm.get<std::string>());
  }

  config.out_dir = get_string(doc, where, "out_dir", "");
  config.jobs = static_cast<int>(get_size(doc, where, "jobs", 1, 1, 256));

  const json params = doc.contains("params") ? doc["params"] : json::object();
  if (!params.is_object()) fail("$.params", "expected an object");
  if (config.experiment == "kd") {
    parse_kd_params(params, config);
    for (const auto& arm : config.arms) {
      try {
        kd::scheme_from_name(arm);
      } catch (const std::invalid_argument& e) {
        fail("$.baselines", e.what());
      }
    }
  } else if (config.experiment == "ssl") {
    parse_ssl_params(params, config);
    for (const auto& arm : config.arms) {
      try {
        ssl::scheme_from_name(arm);
      } catch (const std::invalid_argument& e) {
        fail("$.baselines", e.what());
      }
    }
  } else {
    parse_gridworld_params(params, config);
    for (const auto& arm : config.arms) {
      try {
        rl::mode_from_name(arm);
      } catch (const std::invalid_argument& e) {
        fail("$.modes", e.what());
      }
    }
  }

  config.canonical_json = canonicalize(doc).dump(2);
  config.config_hash = content_hash(config.canonical_json);
  return config;
}

HarnessConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

void override_seeds(HarnessConfig& config, const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("--seeds: expected at least one seed");
  std::set<std::uint64_t> seen;
  for (auto s : seeds) {
    if (!seen.insert(s).second) throw ConfigError("--seeds: duplicate seed " + std::to_string(s));
  }
  config.seeds = seeds;
  json doc = json::parse(config.canonical_json);
  doc["seeds"] = seeds;
  config.canonical_json = doc.dump(2);
  config.config_hash = content_hash(config.canonical_json);
}

std::string run_id_for(const HarnessConfig& config, const std::string& arm,
                       std::uint64_t seed) {
  std::string id;
  if (config.experiment == "kd") {
    id = "kd-" + arm;
  } else if (config.experiment == "ssl") {
    id = std::string("ssl-") +
         (config.ssl.guide == ssl::SslGuide::CrossEntropy ? "ce" : "mse") + "-" + arm;
  } else {
    id = std::string("gw-") + grid::variant_name(config.gridworld.env) + "-" + arm;
  }
  return id + "-s" + std::to_string(seed);
}

std::string group_of_run_id(const std::string& run_id) {
  const auto pos = run_id.rfind("-s");
  if (pos == std::string::npos) return run_id;
  for (std::size_t i = pos + 2; i < run_id.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(run_id[i]))) return run_id;
  }
  return run_id.substr(0, pos);
}

RunRecord run_cell(const HarnessConfig& config, const std::string& arm, std::uint64_t seed) {
  const std::string run_id = run_id_for(config, arm, seed);
  RunRecord record;
  if (config.experiment == "kd") {
    kd::KdConfig cfg = config.kd;
    cfg.scheme = kd::scheme_from_name(arm);
    record = kd::run_kd(cfg, seed, run_id).record;
  } else if (config.experiment == "ssl") {
    ssl::SslConfig cfg = config.ssl;
    cfg.scheme = ssl::scheme_from_name(arm);
    record = ssl::run_ssl(cfg, seed, run_id).record;
  } else {
    rl::GridworldConfig cfg = config.gridworld;
    cfg.mode = rl::mode_from_name(arm);
    record = rl::run_gridworld(cfg, seed, run_id).record;
  }
  record.config_hash = config.config_hash;
  return record;
}

RunOutput run_all(const HarnessConfig& config, const std::filesystem::path& out_dir,
                  int jobs) {
  namespace fs = std::filesystem;
  RunOutput output;
  output.out_dir = out_dir;
  fs::create_directories(out_dir);

  {
    std::ofstream snap(out_dir / "config_snapshot.json");
    snap << config.canonical_json << '\n';
  }

  struct Cell {
    std::string arm;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const auto& arm : config.arms) {
    for (auto seed : config.seeds) cells.push_back({arm, seed});
  }

  std::vector<std::optional<ArmRecord>> results(cells.size());
  std::vector<std::string> failures;
  std::mutex failures_mutex;
  std::atomic<std::size_t> cursor{0};

  const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= cells.size()) return;
      const auto& cell = cells[i];
      const std::string run_id = run_id_for(config, cell.arm, cell.seed);
      try {
        RunRecord record = run_cell(config, cell.arm, cell.seed);
        write_run_csv(record, out_dir / (run_id + ".csv"));
        results[i] = ArmRecord{cell.arm, std::move(record)};
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failures_mutex);
        failures.push_back(run_id + ": " + e.what());
      }
    }
  };

  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (auto& r : results) {
    if (r) output.records.push_back(std::move(*r));
  }
  std::sort(output.records.begin(), output.records.end(),
            [](const ArmRecord& a, const ArmRecord& b) {
              return a.record.run_id < b.record.run_id;
            });
  std::sort(failures.begin(), failures.end());
  output.failures = std::move(failures);

  write_merged_csv(output.records, out_dir / "all_runs.csv");
  write_summary_csv(summarize(output.records), out_dir / "summary.csv");
  if (!output.failures.empty()) {
    std::ofstream log(out_dir / "failures.log");
    for (const auto& f : output.failures) log << f << '\n';
  }
  return output;
}

std::vector<SummaryRow> summarize(const std::vector<ArmRecord>& records) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> buckets;
  for (const auto& rec : records) {
    for (const auto& [metric, value] : rec.record.summary) {
      buckets[{rec.arm, metric}].push_back(value);
    }
  }
  std::vector<SummaryRow> rows;
  for (const auto& [key, values] : buckets) {
    SummaryRow row;
    row.arm = key.first;
    row.metric = key.second;
    row.n = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    row.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - row.mean) * (v - row.mean);
      row.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_summary_csv(const std::vector<SummaryRow>& rows,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "arm,metric,mean,std,n\n";
  for (const auto& row : rows) {
    out << row.arm << ',' << row.metric << ',' << format_double(row.mean) << ','
        << format_double(row.stddev) << ',' << row.n << '\n';
  }
}

void write_merged_csv(const std::vector<ArmRecord>& records,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "run_id,seed,step,metric,value\n";
  for (const auto& rec : records) {
    for (const auto& row : rec.record.series) {
      out << rec.record.run_id << ',' << rec.record.seed << ',' << row.step << ',';
      if (row.split.empty()) {
        out << row.metric;
      } else {
        out << row.split << '_' << row.metric;
      }
      out << ',' << format_double(row.value) << '\n';
    }
  }
}

std::filesystem::path default_out_root() {
  if (const char* env = std::getenv("ADACONG_OUT"); env != nullptr && *env != '\0') {
    return env;
  }
  return "runs";
}

SweepOutput run_sweep(const HarnessConfig& base, const std::string& parameter,
                      const std::vector<std::string>& values,
                      const std::filesystem::path& out_dir, int jobs) {
  if (values.empty()) throw ConfigError("sweep: empty value list");

  json base_doc = json::parse(base.canonical_json);
  json& params = base_doc["params"];
  if (!params.is_object()) params = json::object();

  // Resolve a dotted path ("gamma", "student.epochs") inside params.
  auto set_param = [&](json& root, const std::string& raw) {
    json* node = &root;
    std::string rest = parameter;
    for (;;) {
      const auto dot = rest.find('.');
      const std::string head = rest.substr(0, dot);
      if (dot == std::string::npos) {
        json parsed;
        try {
          parsed = json::parse(raw);
        } catch (const json::parse_error&) {
          parsed = raw;  // plain string value
        }
        (*node)[head] = parsed;
        return;
      }
      node = &(*node)[head];
      rest = rest.substr(dot + 1);
    }
  };

  SweepOutput output;
  std::filesystem::create_directories(out_dir);
  std::ofstream report(out_dir / "sweep_report.csv");
  report << "parameter,value,arm,metric,mean,std,n\n";

  for (const auto& value : values) {
    json doc = base_doc;
    set_param(doc["params"], value);
    HarnessConfig config = parse_config_text(doc.dump(), "sweep(" + parameter + "=" + value + ")");
    const auto cell_dir = out_dir / (parameter + "=" + value);
    const auto result = run_all(config, cell_dir, jobs);
    for (const auto& f : result.failures) output.failures.push_back(f);
    for (const auto& row : summarize(result.records)) {
      report << parameter << ',' << value << ',' << row.arm << ',' << row.metric << ','
             << format_double(row.mean) << ',' << format_double(row.stddev) << ',' << row.n
             << '\n';
    }
  }
  output.report_path = out_dir / "sweep_report.csv";
  return output;
}

}  // namespace adacong::harness
