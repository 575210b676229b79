#pragma once

#include <cctype>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "evtex/attack.hpp"
#include "evtex/detector_train.hpp"

namespace evtex {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

// Minimal TOML subset: [sections], key = value with strings, numbers,
// booleans, and flat arrays; # comments. Enough for experiment configs.
struct TomlValue {
  enum class Kind { string, number, boolean, array } kind = Kind::string;
  std::string str;
  double num = 0;
  bool b = false;
  std::vector<TomlValue> items;
};

using TomlTable = std::map<std::string, TomlValue>;

inline std::string toml_trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline TomlValue toml_scalar(const std::string& raw, int line) {
  TomlValue v;
  std::string s = toml_trim(raw);
  if (s.empty()) throw config_error("line " + std::to_string(line) + ": empty value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"')
      throw config_error("line " + std::to_string(line) + ": unterminated string");
    v.kind = TomlValue::Kind::string;
    v.str = s.substr(1, s.size() - 2);
    return v;
  }
  if (s == "true" || s == "false") {
    v.kind = TomlValue::Kind::boolean;
    v.b = s == "true";
    return v;
  }
  try {
    size_t used = 0;
    v.num = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    v.kind = TomlValue::Kind::number;
    return v;
  } catch (...) {
    throw config_error("line " + std::to_string(line) + ": cannot parse value '" + s + "'");
  }
}

inline std::map<std::string, TomlTable> toml_parse(const std::string& text) {
  std::map<std::string, TomlTable> doc;
  std::string section;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    // strip comments outside strings
    bool in_str = false;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_str = !in_str;
      if (line[i] == '#' && !in_str) {
        line.resize(i);
        break;
      }
    }
    line = toml_trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw config_error("line " + std::to_string(line_no) + ": malformed section header");
      section = toml_trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw config_error("line " + std::to_string(line_no) + ": empty section name");
      doc[section];
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("line " + std::to_string(line_no) + ": expected key = value");
    std::string key = toml_trim(line.substr(0, eq));
    std::string rhs = toml_trim(line.substr(eq + 1));
    if (key.empty()) throw config_error("line " + std::to_string(line_no) + ": empty key");
    TomlValue v;
    if (!rhs.empty() && rhs.front() == '[') {
      if (rhs.back() != ']')
        throw config_error("line " + std::to_string(line_no) + ": unterminated array");
      v.kind = TomlValue::Kind::array;
      std::string body = rhs.substr(1, rhs.size() - 2);
      size_t start = 0;
      bool str_open = false;
      for (size_t i = 0; i <= body.size(); ++i) {
        if (i < body.size() && body[i] == '"') str_open = !str_open;
        if (i == body.size() || (body[i] == ',' && !str_open)) {
          std::string item = toml_trim(body.substr(start, i - start));
          if (!item.empty()) v.items.push_back(toml_scalar(item, line_no));
          start = i + 1;
        }
      }
    } else {
      v = toml_scalar(rhs, line_no);
    }
    doc[section][key] = v;
  }
  return doc;
}

}  // namespace detail

// One config to drive every subcommand; sections mirror the pipeline stages.
struct ExperimentConfig {
  int width = 64, height = 64;

  int texture_n = 10;
  int texture_c = 6;
  std::vector<std::string> mask_groups = {"upper_body", "arms", "legs"};

  double theta = 0.2;
  int bins = 10;

  std::vector<std::string> presets = {"walk_across", "bob", "approach"};
  int n_frames = 4;
  double scale_jitter = 0.1;
  double trans_jitter = 5.0;

  std::string detector_path = "detector.evdt";
  int detector_train_iters = 32000;
  double detector_lr = 1e-3;

  double lambda1 = 10'000.0;
  double lambda2 = 10'000.0;
  double attack_lr = 1e-4;
  int attack_iterations = 2000;
  int attack_batch = 1;
  int attack_scenes = 8;
  double temp_start = 1.0;
  double temp_end = 0.02;
  double anneal_frac = 0.8;

  std::vector<double> eval_thresholds = {0.001, 0.01, 0.1, 0.25};
  int eval_scenes = 12;

  uint64_t seed = 1;
  std::string out_dir = "out";

  int texture_size() const { return texture_n * texture_c; }

  AttackConfig attack_config() const {
    AttackConfig a;
    a.lambda1 = lambda1;
    a.lambda2 = lambda2;
    a.lr = attack_lr;
    a.iterations = attack_iterations;
    a.batch = attack_batch;
    a.n_scenes = attack_scenes;
    a.schedule = TemperatureSchedule{temp_start, temp_end, anneal_frac};
    a.seed = seed;
    a.mask_groups = mask_groups;
    a.grid_n = texture_n;
    a.block_c = texture_c;
    a.width = width;
    a.height = height;
    a.bins = bins;
    a.theta = theta;
    a.n_frames = n_frames;
    a.scale_jitter = scale_jitter;
    a.trans_jitter = trans_jitter;
    return a;
  }

  SurrogateTrainConfig train_config() const {
    SurrogateTrainConfig t;
    t.width = width;
    t.height = height;
    t.bins = bins;
    t.theta = theta;
    t.texture_n = texture_n;
    t.texture_c = texture_c;
    t.n_frames = n_frames;
    t.max_iters = detector_train_iters;
    t.lr = detector_lr;
    return t;
  }
};

inline ExperimentConfig parse_experiment_config(const std::string& text) {
  auto doc = detail::toml_parse(text);
  ExperimentConfig cfg;

  auto require_kind = [](const detail::TomlValue& v, detail::TomlValue::Kind k,
                         const std::string& field) {
    if (v.kind != k) throw config_error("field '" + field + "' has the wrong type");
  };
  auto num = [&](const std::string& sec, const std::string& key, double& out) {
    auto s = doc.find(sec);
    if (s == doc.end()) return;
    auto it = s->second.find(key);
    if (it == s->second.end()) return;
    require_kind(it->second, detail::TomlValue::Kind::number, sec + "." + key);
    out = it->second.num;
  };
  auto integer = [&](const std::string& sec, const std::string& key, int& out) {
    double d = out;
    num(sec, key, d);
    if (d != static_cast<int>(d))
      throw config_error("field '" + sec + "." + key + "' must be an integer");
    out = static_cast<int>(d);
  };
  auto str = [&](const std::string& sec, const std::string& key, std::string& out) {
    auto s = doc.find(sec);
    if (s == doc.end()) return;
    auto it = s->second.find(key);
    if (it == s->second.end()) return;
    require_kind(it->second, detail::TomlValue::Kind::string, sec + "." + key);
    out = it->second.str;
  };
  auto str_list = [&](const std::string& sec, const std::string& key,
                      std::vector<std::string>& out) {
    auto s = doc.find(sec);
    if (s == doc.end()) return;
    auto it = s->second.find(key);
    if (it == s->second.end()) return;
    require_kind(it->second, detail::TomlValue::Kind::array, sec + "." + key);
    out.clear();
    for (const auto& item : it->second.items) {
      require_kind(item, detail::TomlValue::Kind::string, sec + "." + key + "[]");
      out.push_back(item.str);
    }
  };
  auto num_list = [&](const std::string& sec, const std::string& key,
                      std::vector<double>& out) {
    auto s = doc.find(sec);
    if (s == doc.end()) return;
    auto it = s->second.find(key);
    if (it == s->second.end()) return;
    require_kind(it->second, detail::TomlValue::Kind::array, sec + "." + key);
    out.clear();
    for (const auto& item : it->second.items) {
      require_kind(item, detail::TomlValue::Kind::number, sec + "." + key + "[]");
      out.push_back(item.num);
    }
  };

  integer("sensor", "width", cfg.width);
  integer("sensor", "height", cfg.height);
  integer("texture", "n", cfg.texture_n);
  integer("texture", "c", cfg.texture_c);
  str_list("texture", "mask_groups", cfg.mask_groups);
  num("v2e", "theta", cfg.theta);
  integer("v2e", "bins", cfg.bins);
  str_list("scene", "presets", cfg.presets);
  integer("scene", "n_frames", cfg.n_frames);
  num("scene", "scale_jitter", cfg.scale_jitter);
  num("scene", "trans_jitter", cfg.trans_jitter);
  str("detector", "params_path", cfg.detector_path);
  integer("detector", "train_iters", cfg.detector_train_iters);
  num("detector", "lr", cfg.detector_lr);
  num("attack", "lambda1", cfg.lambda1);
  num("attack", "lambda2", cfg.lambda2);
  num("attack", "lr", cfg.attack_lr);
  integer("attack", "iterations", cfg.attack_iterations);
  integer("attack", "batch", cfg.attack_batch);
  integer("attack", "scenes", cfg.attack_scenes);
  num("attack", "temp_start", cfg.temp_start);
  num("attack", "temp_end", cfg.temp_end);
  num("attack", "anneal_frac", cfg.anneal_frac);
  num_list("eval", "thresholds", cfg.eval_thresholds);
  integer("eval", "scenes", cfg.eval_scenes);
  double seed_d = static_cast<double>(cfg.seed);
  num("run", "seed", seed_d);
  cfg.seed = static_cast<uint64_t>(seed_d);
  str("run", "out_dir", cfg.out_dir);

  // reject unknown fields so typos fail loudly with the offending name
  const std::map<std::string, std::vector<std::string>> known = {
      {"sensor", {"width", "height"}},
      {"texture", {"n", "c", "mask_groups"}},
      {"v2e", {"theta", "bins"}},
      {"scene", {"presets", "n_frames", "scale_jitter", "trans_jitter"}},
      {"detector", {"params_path", "train_iters", "lr"}},
      {"attack",
       {"lambda1", "lambda2", "lr", "iterations", "batch", "scenes", "temp_start", "temp_end",
        "anneal_frac"}},
      {"eval", {"thresholds", "scenes"}},
      {"run", {"seed", "out_dir"}},
  };
  for (const auto& [sec, table] : doc) {
    auto k = known.find(sec);
    if (k == known.end()) throw config_error("unknown section '" + sec + "'");
    for (const auto& [key, _] : table) {
      bool found = false;
      for (const auto& name : k->second)
        if (name == key) found = true;
      if (!found) throw config_error("unknown field '" + sec + "." + key + "'");
    }
  }

  // numeric range validation per module preconditions
  if (cfg.width < 8 || cfg.height < 8) throw config_error("field 'sensor': dims must be >= 8");
  if (cfg.texture_n < 1 || cfg.texture_c < 1)
    throw config_error("field 'texture': n and c must be >= 1");
  if (cfg.theta <= 0) throw config_error("field 'v2e.theta' must be > 0");
  if (cfg.bins < 1) throw config_error("field 'v2e.bins' must be >= 1");
  if (cfg.n_frames < 2) throw config_error("field 'scene.n_frames' must be >= 2");
  if (cfg.attack_iterations < 1) throw config_error("field 'attack.iterations' must be >= 1");
  if (cfg.attack_batch < 1) throw config_error("field 'attack.batch' must be >= 1");
  if (cfg.lambda1 < 0 || cfg.lambda2 < 0)
    throw config_error("field 'attack': lambdas must be >= 0");
  if (cfg.temp_end <= 0 || cfg.temp_start < cfg.temp_end)
    throw config_error("field 'attack': need temp_start >= temp_end > 0");
  if (cfg.anneal_frac < 0 || cfg.anneal_frac > 1)
    throw config_error("field 'attack.anneal_frac' must be in [0, 1]");
  for (double t : cfg.eval_thresholds)
    if (t <= 0 || t >= 1) throw config_error("field 'eval.thresholds' entries must be in (0,1)");
  for (const auto& g : cfg.mask_groups)
    if (g != "upper_body" && g != "arms" && g != "legs")
      throw config_error("field 'texture.mask_groups': unknown group '" + g + "'");
  for (const auto& p : cfg.presets)
    if (p != "walk_across" && p != "bob" && p != "approach")
      throw config_error("field 'scene.presets': unknown preset '" + p + "'");
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(read_file(path));
}

}  // namespace evtex
