#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace torusop {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Effective run settings. Defaults here are the documented experiment
// defaults; a flat key=value config file and repeatable --set overrides are
// layered on top (defaults < file < command line), and GINO_SEED wins for the
// seed when set. The full effective state is snapshotted into config.json.
struct Settings {
  std::uint64_t seed = 42;

  int n = 64;
  double alpha = 1.0;

  double data_beta = 2.0;
  double data_lambda_f = 100.0;

  int gino_degree = 16;       // J
  double gino_lambda = 100.0; // truncation Lambda
  int gino_hidden = 16;       // radial MLP width

  std::int64_t train_steps = 4000;
  int train_batch = 16;
  double train_lr = 1e-2;
  double train_weight_decay = 1e-4;
  double train_clip_norm = 1.0;
  std::int64_t train_eval_every = 100;
  double train_energy_weight = 1.0;
  double train_smooth_weight = 1e-4;

  std::int64_t cnn_steps = 500;
  int cnn_batch = 8;
  double cnn_lr = 1e-3;

  int heldout_count = 64;

  int e2_angles = 32;
  int e2_inputs = 16;

  std::vector<double> e3_deltas = {0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30};

  std::vector<int> e4_resolutions = {32, 64, 128};
  std::int64_t e4_steps = 1500;
  int e4_samples = 64;
  int e4_commutation_samples = 32;

  double e5_alpha_reg = 0.1;
  std::int64_t e5_steps = 4000;

  std::vector<double> e6a_lambdas = {25, 50, 100, 200, 400};
  std::vector<double> e6b_weights = {0.0, 1e-4, 1e-2};
  int e6b_seeds = 3;
  double e6b_delta = 0.30;

  double bounds_lambda = 50.0;
  double bounds_beta = 4.0;
  int bounds_samples = 64;
  std::int64_t bounds_steps = 1500;
  double bounds_s = 0.0;      // Sobolev index s of the checked inequalities
  double bounds_gamma = 2.0;  // extra regularity gamma
  bool bounds_inject_violation = false;
};

namespace detail {

inline std::string join_doubles(const std::vector<double>& v) {
  std::ostringstream os;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) os << ",";
    char buf[40];
    snprintf(buf, sizeof(buf), "%.17g", v[i]);
    os << buf;
  }
  return os.str();
}

inline std::string join_ints(const std::vector<int>& v) {
  std::ostringstream os;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) os << ",";
    os << v[i];
  }
  return os.str();
}

inline std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  if (out.empty()) throw ConfigError("empty list value: '" + s + "'");
  return out;
}

inline std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  for (double d : parse_doubles(s)) out.push_back(static_cast<int>(d));
  return out;
}

}  // namespace detail

// Fixed serialization order; this is also the config.json key order.
inline std::vector<std::pair<std::string, std::string>> settings_to_kv(
    const Settings& s) {
  std::vector<std::pair<std::string, std::string>> kv;
  auto num = [&kv](const std::string& k, double v) {
    char buf[40];
    snprintf(buf, sizeof(buf), "%.17g", v);
    kv.emplace_back(k, buf);
  };
  auto inum = [&kv](const std::string& k, long long v) {
    kv.emplace_back(k, std::to_string(v));
  };
  inum("seed", static_cast<long long>(s.seed));
  inum("n", s.n);
  num("alpha", s.alpha);
  num("data.beta", s.data_beta);
  num("data.lambda_f", s.data_lambda_f);
  inum("gino.degree", s.gino_degree);
  num("gino.lambda", s.gino_lambda);
  inum("gino.hidden", s.gino_hidden);
  inum("train.steps", s.train_steps);
  inum("train.batch", s.train_batch);
  num("train.lr", s.train_lr);
  num("train.weight_decay", s.train_weight_decay);
  num("train.clip_norm", s.train_clip_norm);
  inum("train.eval_every", s.train_eval_every);
  num("train.energy_weight", s.train_energy_weight);
  num("train.smooth_weight", s.train_smooth_weight);
  inum("cnn.steps", s.cnn_steps);
  inum("cnn.batch", s.cnn_batch);
  num("cnn.lr", s.cnn_lr);
  inum("heldout.count", s.heldout_count);
  inum("e2.angles", s.e2_angles);
  inum("e2.inputs", s.e2_inputs);
  kv.emplace_back("e3.deltas", detail::join_doubles(s.e3_deltas));
  kv.emplace_back("e4.resolutions", detail::join_ints(s.e4_resolutions));
  inum("e4.steps", s.e4_steps);
  inum("e4.samples", s.e4_samples);
  inum("e4.commutation_samples", s.e4_commutation_samples);
  num("e5.alpha_reg", s.e5_alpha_reg);
  inum("e5.steps", s.e5_steps);
  kv.emplace_back("e6a.lambdas", detail::join_doubles(s.e6a_lambdas));
  kv.emplace_back("e6b.weights", detail::join_doubles(s.e6b_weights));
  inum("e6b.seeds", s.e6b_seeds);
  num("e6b.delta", s.e6b_delta);
  num("bounds.lambda", s.bounds_lambda);
  num("bounds.beta", s.bounds_beta);
  inum("bounds.samples", s.bounds_samples);
  inum("bounds.steps", s.bounds_steps);
  num("bounds.s", s.bounds_s);
  num("bounds.gamma", s.bounds_gamma);
  kv.emplace_back("bounds.inject_violation",
                  s.bounds_inject_violation ? "1" : "0");
  return kv;
}

inline void apply_setting(Settings& s, const std::string& key,
                          const std::string& value) {
  try {
    if (key == "seed") s.seed = std::stoull(value);
    else if (key == "n") s.n = std::stoi(value);
    else if (key == "alpha") s.alpha = std::stod(value);
    else if (key == "data.beta") s.data_beta = std::stod(value);
    else if (key == "data.lambda_f") s.data_lambda_f = std::stod(value);
    else if (key == "gino.degree") s.gino_degree = std::stoi(value);
    else if (key == "gino.lambda") s.gino_lambda = std::stod(value);
    else if (key == "gino.hidden") s.gino_hidden = std::stoi(value);
    else if (key == "train.steps") s.train_steps = std::stoll(value);
    else if (key == "train.batch") s.train_batch = std::stoi(value);
    else if (key == "train.lr") s.train_lr = std::stod(value);
    else if (key == "train.weight_decay") s.train_weight_decay = std::stod(value);
    else if (key == "train.clip_norm") s.train_clip_norm = std::stod(value);
    else if (key == "train.eval_every") s.train_eval_every = std::stoll(value);
    else if (key == "train.energy_weight") s.train_energy_weight = std::stod(value);
    else if (key == "train.smooth_weight") s.train_smooth_weight = std::stod(value);
    else if (key == "cnn.steps") s.cnn_steps = std::stoll(value);
    else if (key == "cnn.batch") s.cnn_batch = std::stoi(value);
    else if (key == "cnn.lr") s.cnn_lr = std::stod(value);
    else if (key == "heldout.count") s.heldout_count = std::stoi(value);
    else if (key == "e2.angles") s.e2_angles = std::stoi(value);
    else if (key == "e2.inputs") s.e2_inputs = std::stoi(value);
    else if (key == "e3.deltas") s.e3_deltas = detail::parse_doubles(value);
    else if (key == "e4.resolutions") s.e4_resolutions = detail::parse_ints(value);
    else if (key == "e4.steps") s.e4_steps = std::stoll(value);
    else if (key == "e4.samples") s.e4_samples = std::stoi(value);
    else if (key == "e4.commutation_samples")
      s.e4_commutation_samples = std::stoi(value);
    else if (key == "e5.alpha_reg") s.e5_alpha_reg = std::stod(value);
    else if (key == "e5.steps") s.e5_steps = std::stoll(value);
    else if (key == "e6a.lambdas") s.e6a_lambdas = detail::parse_doubles(value);
    else if (key == "e6b.weights") s.e6b_weights = detail::parse_doubles(value);
    else if (key == "e6b.seeds") s.e6b_seeds = std::stoi(value);
    else if (key == "e6b.delta") s.e6b_delta = std::stod(value);
    else if (key == "bounds.lambda") s.bounds_lambda = std::stod(value);
    else if (key == "bounds.beta") s.bounds_beta = std::stod(value);
    else if (key == "bounds.samples") s.bounds_samples = std::stoi(value);
    else if (key == "bounds.steps") s.bounds_steps = std::stoll(value);
    else if (key == "bounds.s") s.bounds_s = std::stod(value);
    else if (key == "bounds.gamma") s.bounds_gamma = std::stod(value);
    else if (key == "bounds.inject_violation")
      s.bounds_inject_violation = (value == "1" || value == "true");
    else
      throw ConfigError("unknown config key: '" + key + "'");
  } catch (const std::invalid_argument&) {
    throw ConfigError("bad value for '" + key + "': '" + value + "'");
  } catch (const std::out_of_range&) {
    throw ConfigError("value out of range for '" + key + "': '" + value + "'");
  }
}

// Flat key=value lines; '#' starts a comment, blank lines ignored.
inline void load_config_file(Settings& s, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t b = line.find_last_not_of(" \t\r");
    line = line.substr(a, b - a + 1);
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto strip = [](std::string& t) {
      size_t x = t.find_first_not_of(" \t");
      size_t y = t.find_last_not_of(" \t");
      t = (x == std::string::npos) ? "" : t.substr(x, y - x + 1);
    };
    strip(key);
    strip(value);
    apply_setting(s, key, value);
  }
}

// The only environment input: GINO_SEED overrides the configured seed.
inline void apply_env_seed(Settings& s) {
  if (const char* env = std::getenv("GINO_SEED")) {
    try {
      s.seed = std::stoull(env);
    } catch (...) {
      throw ConfigError("GINO_SEED is not a valid unsigned integer");
    }
  }
}

}  // namespace torusop
