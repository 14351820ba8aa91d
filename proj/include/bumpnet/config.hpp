#pragma once

// Run configurations read from JSON. Every key is checked: unknown keys and
// wrongly typed values are rejected with their full key path.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bumpnet/deeponet.hpp"
#include "bumpnet/ednn.hpp"
#include "bumpnet/error.hpp"
#include "bumpnet/optim.hpp"
#include "bumpnet/pinn.hpp"

namespace bumpnet {

using Json = nlohmann::json;

/// Read-once view of a JSON object that remembers which keys were consumed.
class ConfigNode {
 public:
  ConfigNode(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(j_.at(key), key);
  }

  template <class T>
  T need(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ValidationError("missing required key '" + join(key) + "'");
    return convert<T>(j_.at(key), key);
  }

  /// Sub-object; an absent key yields an empty object.
  ConfigNode child(const std::string& key) {
    used_.insert(key);
    static const Json empty = Json::object();
    if (!j_.contains(key)) return ConfigNode(empty, join(key));
    return ConfigNode(j_.at(key), join(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw ValidationError("unknown configuration key '" + join(k) + "'");
  }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "configuration" : "'" + path_ + "'"; }

  template <class T>
  T convert(const Json& v, const std::string& key) const {
    const auto bad = [&](const std::string& what) {
      return ValidationError("configuration key '" + join(key) + "' " + what);
    };
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw bad("must be true or false");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw bad("must be a string");
      return v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0))
        throw bad(std::is_unsigned_v<T> ? "must be a non-negative integer" : "must be an integer");
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw bad("must be a number");
      return v.get<T>();
    } else {
      using E = typename T::value_type;
      if (!v.is_array()) throw bad("must be an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i) out.push_back(convert<E>(v[i], key + "[" + std::to_string(i) + "]"));
      return out;
    }
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open configuration file " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ValidationError("configuration file " + path + " is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Shared sections.

inline void read_optimizer(ConfigNode node, TrainOptions& t) {
  t.epochs = node.get<std::size_t>("epochs", t.epochs);
  t.schedule.initial = node.get<double>("lr", t.schedule.initial);
  t.schedule.decay = node.get<double>("decay", t.schedule.decay);
  t.schedule.interval = node.get<std::size_t>("decay_every", t.schedule.interval);
  t.adam.beta1 = node.get<double>("beta1", t.adam.beta1);
  t.adam.beta2 = node.get<double>("beta2", t.adam.beta2);
  t.adam.eps = node.get<double>("eps", t.adam.eps);
  node.finish();
  require(t.schedule.initial > 0.0 && t.schedule.decay > 0.0 && t.schedule.interval > 0,
          "optimizer: lr, decay and decay_every must be positive");
}

inline PruneConfig read_prune(ConfigNode node) {
  PruneConfig p;
  const auto mode = node.get<std::string>("mode", "none");
  if (mode == "none") p.mode = PruneConfig::Mode::None;
  else if (mode == "fraction") p.mode = PruneConfig::Mode::Fraction;
  else if (mode == "threshold") p.mode = PruneConfig::Mode::Threshold;
  else throw ValidationError("configuration key 'prune.mode' must be none, fraction or threshold");
  p.value = node.get<double>("value", 0.0);
  p.interval = node.get<std::size_t>("interval", 0);
  p.rounds = node.get<std::size_t>("rounds", 0);
  node.finish();
  return p;
}

// ---------------------------------------------------------------------------
// train-pinn

struct PinnRunConfig {
  std::string name;             // run / benchmark label
  std::string problem;
  double problem_parameter = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> counts;
  double sharpness = kInitialSharpness;
  bool least_squares_heights = false;
  TrainOptions train;
  std::size_t interior = 1000;
  std::size_t boundary = 100;   // per boundary segment
  std::uint64_t seed = 0;
  bool self_adaptive = false;
  LrSchedule sa_schedule{0.02, 0.9, 1000};
  std::size_t eval_resolution = 0;  // 0: default grid
  std::size_t smoke_epochs = 500;

  std::string method() const { return self_adaptive ? "bump-sapinn" : "bump-pinn"; }
};

inline PinnRunConfig parse_pinn_config(const Json& j) {
  ConfigNode root(j, "");
  PinnRunConfig c;
  if (root.get<std::string>("command", "train-pinn") != "train-pinn")
    throw ValidationError("configuration key 'command' must be train-pinn for this command");
  c.problem = root.need<std::string>("problem");
  c.name = root.get<std::string>("name", c.problem);
  if (root.has("problem_parameter")) c.problem_parameter = root.get<double>("problem_parameter", 0.0);
  c.seed = root.get<std::uint64_t>("seed", 0);
  c.eval_resolution = root.get<std::size_t>("eval_resolution", 0);
  c.smoke_epochs = root.get<std::size_t>("smoke_epochs", c.smoke_epochs);
  {
    auto m = root.child("model");
    c.counts = m.need<std::vector<std::size_t>>("counts");
    c.sharpness = m.get<double>("sharpness", c.sharpness);
    c.least_squares_heights = m.get<bool>("least_squares_heights", false);
    m.finish();
  }
  read_optimizer(root.child("optimizer"), c.train);
  {
    auto s = root.child("sampling");
    c.interior = s.get<std::size_t>("interior", c.interior);
    c.boundary = s.get<std::size_t>("boundary", c.boundary);
    s.finish();
  }
  {
    auto s = root.child("sa");
    c.self_adaptive = s.get<bool>("enabled", false);
    c.sa_schedule.initial = s.get<double>("lr", c.sa_schedule.initial);
    c.sa_schedule.decay = s.get<double>("decay", c.sa_schedule.decay);
    c.sa_schedule.interval = s.get<std::size_t>("decay_every", c.sa_schedule.interval);
    s.finish();
  }
  c.train.prune = read_prune(root.child("prune"));
  root.finish();
  problem_by_name(c.problem);  // validates the name
  return c;
}

// ---------------------------------------------------------------------------
// ednn

struct EdnnRunConfig {
  std::string name = "ednn-heat2d";
  std::uint64_t seed = 0;
  EdnnConfig ednn;
  std::size_t smoke_fit_epochs = 500;
  double smoke_end_time = 0.05;
};

inline EdnnRunConfig parse_ednn_config(const Json& j) {
  ConfigNode root(j, "");
  EdnnRunConfig c;
  if (root.get<std::string>("command", "ednn") != "ednn")
    throw ValidationError("configuration key 'command' must be ednn for this command");
  c.name = root.get<std::string>("name", c.name);
  c.seed = root.get<std::uint64_t>("seed", 0);
  auto& e = c.ednn;
  {
    auto m = root.child("model");
    e.counts = m.get<std::vector<std::size_t>>("counts", e.counts);
    m.finish();
  }
  read_optimizer(root.child("fit"), e.fit);
  {
    auto s = root.child("ednn");
    e.nu = s.get<double>("nu", e.nu);
    e.dt = s.get<double>("dt", e.dt);
    e.end_time = s.get<double>("end_time", e.end_time);
    e.tolerance = s.get<double>("tolerance", e.tolerance);
    e.output_every = s.get<std::size_t>("output_every", e.output_every);
    e.snapshot_times = s.get<std::vector<double>>("snapshot_times", e.snapshot_times);
    e.snapshot_resolution = s.get<std::size_t>("snapshot_resolution", e.snapshot_resolution);
    e.error_resolution = s.get<std::size_t>("error_resolution", e.error_resolution);
    e.fit_points_per_axis = s.get<std::size_t>("fit_points_per_axis", e.fit_points_per_axis);
    e.init_heights = s.get<bool>("least_squares_init", e.init_heights);
    e.refit_heights = s.get<bool>("least_squares_refit", e.refit_heights);
    s.finish();
  }
  e.prune_before_evolution = read_prune(root.child("prune"));
  c.smoke_fit_epochs = root.get<std::size_t>("smoke_fit_epochs", c.smoke_fit_epochs);
  c.smoke_end_time = root.get<double>("smoke_end_time", c.smoke_end_time);
  root.finish();
  require(e.dt > 0.0 && e.end_time > 0.0 && e.nu >= 0.0, "ednn: dt and end_time must be positive, nu non-negative");
  return c;
}

// ---------------------------------------------------------------------------
// deeponet-gen / deeponet-train

struct DeepOnetRunConfig {
  std::string name = "deeponet-rd";
  std::uint64_t seed = 0;
  DeepOnetArchitecture arch;
  DatasetSpec data;                  // functions = training count
  std::size_t test_functions = 200;
  DeepOnetTrainOptions train;
  std::size_t smoke_steps = 200;
  std::size_t smoke_functions = 20;
};

inline DeepOnetRunConfig parse_deeponet_config(const Json& j) {
  ConfigNode root(j, "");
  DeepOnetRunConfig c;
  const auto cmd = root.get<std::string>("command", "deeponet");
  if (cmd != "deeponet") throw ValidationError("configuration key 'command' must be deeponet for this command");
  c.name = root.get<std::string>("name", c.name);
  c.seed = root.get<std::uint64_t>("seed", 0);
  {
    auto m = root.child("model");
    c.arch.branch_widths = m.get<std::vector<std::size_t>>("branch_widths", c.arch.branch_widths);
    c.arch.trunk_counts = m.get<std::vector<std::size_t>>("trunk_counts", c.arch.trunk_counts);
    c.arch.trunk_sharpness = m.get<double>("trunk_sharpness", c.arch.trunk_sharpness);
    m.finish();
  }
  {
    auto d = root.child("dataset");
    c.data.functions = d.get<std::size_t>("train_functions", c.data.functions);
    c.test_functions = d.get<std::size_t>("test_functions", c.test_functions);
    c.data.points = d.get<std::size_t>("points_per_function", c.data.points);
    c.data.sensors = d.get<std::size_t>("sensors", c.data.sensors);
    c.data.length_scale = d.get<double>("length_scale", c.data.length_scale);
    c.data.sigma = d.get<double>("sigma", c.data.sigma);
    c.data.grid.nx = d.get<std::size_t>("nx", c.data.grid.nx);
    c.data.grid.nt = d.get<std::size_t>("nt", c.data.grid.nt);
    c.data.pde.diffusion = d.get<double>("diffusion", c.data.pde.diffusion);
    c.data.pde.reaction = d.get<double>("reaction", c.data.pde.reaction);
    c.data.pde.end_time = d.get<double>("end_time", c.data.pde.end_time);
    d.finish();
  }
  {
    auto o = root.child("optimizer");
    c.train.steps = o.get<std::size_t>("steps", c.train.steps);
    c.train.batch_functions = o.get<std::size_t>("batch_functions", c.train.batch_functions);
    c.train.schedule.initial = o.get<double>("lr", c.train.schedule.initial);
    c.train.schedule.decay = o.get<double>("decay", c.train.schedule.decay);
    c.train.schedule.interval = o.get<std::size_t>("decay_every", c.train.schedule.interval);
    c.train.adam.beta1 = o.get<double>("beta1", c.train.adam.beta1);
    c.train.adam.beta2 = o.get<double>("beta2", c.train.adam.beta2);
    c.train.adam.eps = o.get<double>("eps", c.train.adam.eps);
    c.train.log_every = o.get<std::size_t>("log_every", c.train.log_every);
    o.finish();
  }
  c.smoke_steps = root.get<std::size_t>("smoke_steps", c.smoke_steps);
  c.smoke_functions = root.get<std::size_t>("smoke_functions", c.smoke_functions);
  root.finish();
  require(c.arch.branch_widths.front() == c.data.sensors, "model.branch_widths[0] must equal dataset.sensors");
  return c;
}

// ---------------------------------------------------------------------------
// fit

struct FitRunConfig {
  std::string name = "fit";
  std::vector<std::size_t> counts;
  std::vector<double> lower, upper;  // empty: bounding box of the data
  double sharpness = kInitialSharpness;
  bool least_squares_heights = false;
  TrainOptions train;
  std::uint64_t seed = 0;
  std::size_t smoke_epochs = 500;
};

inline FitRunConfig parse_fit_config(const Json& j) {
  ConfigNode root(j, "");
  FitRunConfig c;
  if (root.get<std::string>("command", "fit") != "fit")
    throw ValidationError("configuration key 'command' must be fit for this command");
  c.name = root.get<std::string>("name", c.name);
  c.seed = root.get<std::uint64_t>("seed", 0);
  {
    auto m = root.child("model");
    c.counts = m.need<std::vector<std::size_t>>("counts");
    c.lower = m.get<std::vector<double>>("lower", {});
    c.upper = m.get<std::vector<double>>("upper", {});
    c.sharpness = m.get<double>("sharpness", c.sharpness);
    c.least_squares_heights = m.get<bool>("least_squares_heights", false);
    m.finish();
  }
  read_optimizer(root.child("optimizer"), c.train);
  c.train.prune = read_prune(root.child("prune"));
  c.smoke_epochs = root.get<std::size_t>("smoke_epochs", c.smoke_epochs);
  root.finish();
  require(c.lower.size() == c.upper.size(), "model.lower and model.upper must have the same length");
  return c;
}

/// The command a configuration file is meant for ("train-pinn" when absent).
inline std::string config_command(const Json& j) {
  if (!j.is_object()) throw ValidationError("configuration must be a JSON object");
  if (!j.contains("command")) return "train-pinn";
  if (!j.at("command").is_string()) throw ValidationError("configuration key 'command' must be a string");
  return j.at("command").get<std::string>();
}

/// Applies --seed and --smoke to a configuration for `command`; the result is
/// what gets stored in the run directory.
inline Json resolve_config(Json j, const std::string& command, std::optional<std::uint64_t> seed, bool smoke) {
  if (!j.is_object()) throw ValidationError("configuration must be a JSON object");
  if (seed) j["seed"] = *seed;
  if (!smoke) return j;
  auto num = [&](const char* key, auto fallback) {
    using T = decltype(fallback);
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number()) throw ValidationError(std::string("configuration key '") + key + "' must be a number");
    return v.get<T>();
  };
  if (command == "train-pinn" || command == "fit") {
    j["optimizer"]["epochs"] = num("smoke_epochs", std::size_t{500});
  } else if (command == "ednn") {
    j["fit"]["epochs"] = num("smoke_fit_epochs", std::size_t{500});
    j["ednn"]["end_time"] = num("smoke_end_time", 0.05);
  } else if (command == "deeponet") {
    const auto fns = num("smoke_functions", std::size_t{20});
    j["optimizer"]["steps"] = num("smoke_steps", std::size_t{200});
    j["dataset"]["train_functions"] = fns;
    j["dataset"]["test_functions"] = fns;
  }
  return j;
}

}  // namespace bumpnet
