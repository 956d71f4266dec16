#include "robust_te/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <set>
#include <sstream>

#include "robust_te/errors.hpp"

namespace robust_te {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

std::size_t get_count(const json& j, const std::string& key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError("'" + key + "' must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

std::vector<std::size_t> get_sweep(const json& j, const std::string& key,
                                   std::vector<std::size_t> fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  std::vector<std::size_t> out;
  auto take = [&](const json& x) {
    if (!x.is_number_integer() || x.get<long long>() < 1) {
      throw ConfigError("'" + key + "' values must be positive integers");
    }
    out.push_back(x.get<std::size_t>());
  };
  if (v.is_array()) {
    for (const auto& x : v) take(x);
  } else {
    take(v);
  }
  return out;
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_absolute()) return p;
  return (std::filesystem::path(base) / path).lexically_normal().string();
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j,
             {"topology", "trace", "random_capacities", "scale", "k", "c", "w", "R", "epochs",
              "epoch_length", "batch_size", "samples_per_state", "checkpoint_every",
              "train_frac", "seeds", "schemes", "output_dir", "model", "optimizer",
              "normalization", "threads", "export_lp"},
             "config");

  ExperimentConfig cfg;
  if (!j.contains("topology")) throw ConfigError("config requires 'topology'");
  cfg.topology_path = resolve(base_dir, get<std::string>(j, "topology", ""));

  if (!j.contains("trace")) throw ConfigError("config requires 'trace'");
  const json& tr = j.at("trace");
  check_keys(tr, {"path", "format", "unit_scale", "interval_seconds", "synth"}, "trace");
  cfg.trace_path = resolve(base_dir, get<std::string>(tr, "path", ""));
  cfg.trace_format = get<std::string>(tr, "format", cfg.trace_format);
  cfg.unit_scale = get<double>(tr, "unit_scale", cfg.unit_scale);
  cfg.interval_seconds = get<double>(tr, "interval_seconds", cfg.interval_seconds);
  if (tr.contains("synth")) {
    const json& s = tr.at("synth");
    check_keys(s, {"pattern", "length", "seed", "period", "load", "noise", "amplitude",
                   "uniform_masses"},
               "trace.synth");
    SynthOptions o;
    o.pattern = parse_synth_pattern(get<std::string>(s, "pattern", "gravity"));
    o.length = get_count(s, "length", o.length);
    o.seed = get<std::uint64_t>(s, "seed", o.seed);
    o.period = get_count(s, "period", o.period);
    o.load = get<double>(s, "load", o.load);
    o.noise = get<double>(s, "noise", o.noise);
    o.amplitude = get<double>(s, "amplitude", o.amplitude);
    o.uniform_masses = get<bool>(s, "uniform_masses", o.uniform_masses);
    o.interval_seconds = cfg.interval_seconds;
    cfg.synth = o;
  }
  if (cfg.trace_path.empty() == !cfg.synth.has_value()) {
    throw ConfigError("trace needs exactly one of 'path' or 'synth'");
  }

  if (j.contains("random_capacities")) {
    const json& rc = j.at("random_capacities");
    check_keys(rc, {"lo", "hi", "seed"}, "random_capacities");
    CapacityRange r;
    r.lo = get<double>(rc, "lo", r.lo);
    r.hi = get<double>(rc, "hi", r.hi);
    r.seed = get<std::uint64_t>(rc, "seed", r.seed);
    cfg.random_capacities = r;
  }

  cfg.scale = get<double>(j, "scale", cfg.scale);
  cfg.k = get_count(j, "k", cfg.k);
  cfg.c_values = get_sweep(j, "c", cfg.c_values);
  cfg.w_values = get_sweep(j, "w", cfg.w_values);
  if (j.contains("R")) {
    const json& r = j.at("R");
    if (r.is_string() && r.get<std::string>() == "auto") {
      cfg.r_size.reset();
    } else if (r.is_number_integer() && r.get<long long>() >= 1) {
      cfg.r_size = r.get<std::size_t>();
    } else {
      throw ConfigError("'R' must be \"auto\" or a positive integer");
    }
  }
  cfg.epochs = get_count(j, "epochs", cfg.epochs);
  cfg.epoch_length = get_count(j, "epoch_length", cfg.epoch_length);
  cfg.batch_size = get_count(j, "batch_size", cfg.batch_size);
  cfg.samples_per_state = get_count(j, "samples_per_state", cfg.samples_per_state);
  cfg.checkpoint_every = get_count(j, "checkpoint_every", cfg.checkpoint_every);
  cfg.train_frac = get<double>(j, "train_frac", cfg.train_frac);

  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    check_keys(s, {"split", "init", "sample"}, "seeds");
    cfg.split_seed = get<std::uint64_t>(s, "split", cfg.split_seed);
    cfg.init_seed = get<std::uint64_t>(s, "init", cfg.init_seed);
    cfg.sample_seed = get<std::uint64_t>(s, "sample", cfg.sample_seed);
  }
  cfg.schemes = get<std::vector<std::string>>(j, "schemes", cfg.schemes);
  cfg.output_dir = resolve(base_dir, get<std::string>(j, "output_dir", cfg.output_dir));

  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, {"filters", "hidden"}, "model");
    cfg.filters = get_count(m, "filters", cfg.filters);
    cfg.hidden = get_count(m, "hidden", cfg.hidden);
  }
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    check_keys(o, {"lr_initial", "lr_decay", "lr_decay_every", "lr_min", "entropy_beta"},
               "optimizer");
    cfg.optimizer.lr_initial = get<double>(o, "lr_initial", cfg.optimizer.lr_initial);
    cfg.optimizer.lr_decay = get<double>(o, "lr_decay", cfg.optimizer.lr_decay);
    cfg.optimizer.lr_decay_every = get_count(o, "lr_decay_every", cfg.optimizer.lr_decay_every);
    cfg.optimizer.lr_min = get<double>(o, "lr_min", cfg.optimizer.lr_min);
    cfg.optimizer.entropy_beta = get<double>(o, "entropy_beta", cfg.optimizer.entropy_beta);
  }
  cfg.normalization = get<std::string>(j, "normalization", cfg.normalization);
  cfg.threads = get_count(j, "threads", cfg.threads);
  cfg.export_lp = get<bool>(j, "export_lp", cfg.export_lp);

  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto base = std::filesystem::path(path).parent_path().string();
  return parse_config(ss.str(), base.empty() ? "." : base);
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.topology_path.empty()) throw ConfigError("topology path is empty");
  if (cfg.trace_path.empty() && !cfg.synth) throw ConfigError("no trace source configured");
  if (cfg.synth && cfg.synth->length == 0) throw ConfigError("synthetic length must be >= 1");
  parse_trace_format(cfg.trace_format);
  if (!(cfg.unit_scale > 0.0)) throw ConfigError("unit_scale must be positive");
  if (!(cfg.interval_seconds > 0.0)) throw ConfigError("interval_seconds must be positive");
  if (!(cfg.scale > 0.0)) throw ConfigError("scale must be positive");
  if (cfg.k == 0) throw ConfigError("k must be >= 1");
  if (cfg.c_values.empty() || cfg.w_values.empty()) throw ConfigError("c and w need values");
  for (auto c : cfg.c_values) {
    if (c == 0) throw ConfigError("c must be >= 1");
  }
  for (auto w : cfg.w_values) {
    if (w == 0) throw ConfigError("w must be >= 1");
  }
  if (cfg.epochs == 0) throw ConfigError("epochs must be >= 1");
  if (cfg.samples_per_state == 0) throw ConfigError("samples_per_state must be >= 1");
  if (!(cfg.train_frac > 0.0 && cfg.train_frac < 1.0)) {
    throw ConfigError("train_frac must lie strictly between 0 and 1");
  }
  if (cfg.schemes.empty()) throw ConfigError("scheme list must not be empty");
  std::set<std::string> seen;
  for (const auto& s : cfg.schemes) {
    if (std::find(known_schemes().begin(), known_schemes().end(), s) == known_schemes().end()) {
      throw ConfigError("unknown scheme '" + s + "'");
    }
    if (!seen.insert(s).second) throw ConfigError("duplicate scheme '" + s + "'");
  }
  if (cfg.filters == 0 || cfg.hidden == 0) throw ConfigError("model sizes must be positive");
  if (!(cfg.optimizer.lr_initial > 0.0) || !(cfg.optimizer.lr_min > 0.0) ||
      !(cfg.optimizer.lr_decay > 0.0) || cfg.optimizer.entropy_beta < 0.0) {
    throw ConfigError("invalid optimizer settings");
  }
  if (cfg.normalization != "global-max" && cfg.normalization != "window-max") {
    throw ConfigError("normalization must be 'global-max' or 'window-max'");
  }
  if (cfg.random_capacities &&
      !(cfg.random_capacities->lo > 0.0 && cfg.random_capacities->lo <= cfg.random_capacities->hi)) {
    throw ConfigError("random_capacities requires 0 < lo <= hi");
  }
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["topology"] = std::filesystem::path(cfg.topology_path).filename().string();
  json tr;
  if (!cfg.trace_path.empty()) tr["path"] = std::filesystem::path(cfg.trace_path).filename().string();
  tr["format"] = cfg.trace_format;
  tr["unit_scale"] = cfg.unit_scale;
  tr["interval_seconds"] = cfg.interval_seconds;
  if (cfg.synth) {
    tr["synth"] = {{"pattern", to_string(cfg.synth->pattern)},
                   {"length", cfg.synth->length},
                   {"seed", cfg.synth->seed},
                   {"period", cfg.synth->period},
                   {"load", cfg.synth->load},
                   {"noise", cfg.synth->noise},
                   {"amplitude", cfg.synth->amplitude},
                   {"uniform_masses", cfg.synth->uniform_masses}};
  }
  j["trace"] = tr;
  if (cfg.random_capacities) {
    j["random_capacities"] = {{"lo", cfg.random_capacities->lo},
                              {"hi", cfg.random_capacities->hi},
                              {"seed", cfg.random_capacities->seed}};
  }
  j["scale"] = cfg.scale;
  j["k"] = cfg.k;
  j["c"] = cfg.c_values;
  j["w"] = cfg.w_values;
  if (cfg.r_size) {
    j["R"] = *cfg.r_size;
  } else {
    j["R"] = "auto";
  }
  j["epochs"] = cfg.epochs;
  j["epoch_length"] = cfg.epoch_length;
  j["batch_size"] = cfg.batch_size;
  j["samples_per_state"] = cfg.samples_per_state;
  j["train_frac"] = cfg.train_frac;
  j["seeds"] = {{"split", cfg.split_seed}, {"init", cfg.init_seed}, {"sample", cfg.sample_seed}};
  j["schemes"] = cfg.schemes;
  j["model"] = {{"filters", cfg.filters}, {"hidden", cfg.hidden}};
  j["optimizer"] = {{"lr_initial", cfg.optimizer.lr_initial},
                    {"lr_decay", cfg.optimizer.lr_decay},
                    {"lr_decay_every", cfg.optimizer.lr_decay_every},
                    {"lr_min", cfg.optimizer.lr_min},
                    {"entropy_beta", cfg.optimizer.entropy_beta}};
  j["normalization"] = cfg.normalization;
  return j.dump();  // nlohmann::json objects keep keys sorted
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : config_to_json(cfg)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace robust_te
