#include "covflow/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

namespace covflow {

namespace {

using nlohmann::json;

const std::set<std::string> kStudies = {"theory",     "simulate",  "grid",
                                        "depth-rate", "width-rate", "joint"};

[[noreturn]] void fail(const std::string& key, const std::string& why) {
  throw ConfigError("config key \"" + key + "\": " + why);
}

void expect_keys(const json& j, const std::set<std::string>& allowed,
                 const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key))
      throw ConfigError("unknown key \"" + key + "\" in " + where);
  }
}

double get_number(const json& j, const std::string& key) {
  if (!j.at(key).is_number()) fail(key, "must be a number");
  return j.at(key).get<double>();
}

std::vector<std::int64_t> get_int_list(const json& j, const std::string& key) {
  if (!j.at(key).is_array()) fail(key, "must be a list of positive integers");
  std::vector<std::int64_t> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 1)
      fail(key, "entries must be positive integers");
    out.push_back(v.get<std::int64_t>());
  }
  if (out.empty()) fail(key, "must be nonempty");
  return out;
}

std::vector<double> get_real_list(const json& j, const std::string& key) {
  if (!j.at(key).is_array()) fail(key, "must be a list of reals");
  std::vector<double> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number()) fail(key, "entries must be reals");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

ScalingSequence parse_scaling(const json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw ConfigError("config key \"scaling\": needs an object with \"kind\"");
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "uniform") {
    expect_keys(j, {"kind", "gamma"}, "scaling");
    double gamma = j.contains("gamma") ? get_number(j, "gamma") : 0.5;
    if (!(gamma > 0.0)) fail("gamma", "must be positive");
    return ScalingSequence::uniform(gamma);
  }
  if (kind == "series") {
    expect_keys(j, {"kind", "series", "p", "values"}, "scaling");
    std::string series = j.contains("series")
                             ? j.at("series").get<std::string>()
                             : std::string("inverse_power");
    if (series == "inverse_power") {
      double p = j.contains("p") ? get_number(j, "p") : 1.0;
      if (!(p > 0.0)) fail("p", "must be positive");
      return ScalingSequence::series(InversePower{p});
    }
    if (series == "log_damped") return ScalingSequence::series(LogDamped{});
    if (series == "explicit") {
      if (!j.contains("values")) fail("values", "required for explicit series");
      std::vector<double> values = get_real_list(j, "values");
      for (double v : values)
        if (!(v >= 0.0)) fail("values", "entries must be nonnegative");
      return ScalingSequence::series(Explicit{std::move(values)});
    }
    fail("series", "unknown series \"" + series + "\"");
  }
  if (kind == "custom") {
    expect_keys(j, {"kind", "table"}, "scaling");
    if (!j.contains("table")) fail("table", "required for custom scaling");
    std::vector<double> table = get_real_list(j, "table");
    for (double v : table)
      if (!(v >= 0.0)) fail("table", "entries must be nonnegative");
    return ScalingSequence::custom_table(std::move(table));
  }
  fail("kind", "unknown scaling kind \"" + kind + "\"");
}

Arch parse_arch(const std::string& name) {
  if (name == "scaled_resnet") return Arch::ScaledResNet;
  if (name == "mlp") return Arch::Mlp;
  if (name == "shaped_mlp") return Arch::ShapedMlp;
  if (name == "shaped_resnet") return Arch::ShapedResNet;
  throw ConfigError("config key \"arch\": unknown architecture \"" + name +
                    "\"");
}

RunConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  expect_keys(j,
              {"study", "arch", "scaling", "n_list", "L_list", "d", "trials",
               "master_seed", "step", "tol", "beta", "c0", "output_dir",
               "workers"},
              "config");

  RunConfig cfg;
  if (!j.contains("study")) fail("study", "required");
  cfg.study = j.at("study").get<std::string>();
  if (!kStudies.count(cfg.study))
    fail("study", "unknown study \"" + cfg.study + "\"");

  if (j.contains("arch")) cfg.arch = j.at("arch").get<std::string>();
  if (cfg.arch != "all") parse_arch(cfg.arch);  // validate name
  if (cfg.arch == "all" && cfg.study != "joint")
    fail("arch", "\"all\" is only meaningful for the joint study");

  cfg.scaling = j.contains("scaling")
                    ? j.at("scaling")
                    : json{{"kind", "uniform"}, {"gamma", 0.5}};
  parse_scaling(cfg.scaling);  // validate early

  if (j.contains("n_list")) cfg.n_list = get_int_list(j, "n_list");
  if (j.contains("L_list")) cfg.L_list = get_int_list(j, "L_list");

  // Documented per-study defaults (desk scale).
  if (cfg.n_list.empty()) {
    if (cfg.study == "grid") cfg.n_list = {8, 256, 4096};
    else if (cfg.study == "width-rate")
      cfg.n_list = {32, 64, 128, 256, 512, 1024, 2048, 4096};
    else if (cfg.study == "joint") cfg.n_list = {64, 256, 1024};
    else cfg.n_list = {256};
  }
  if (cfg.L_list.empty()) {
    if (cfg.study == "grid") cfg.L_list = {2, 8, 64};
    else if (cfg.study == "depth-rate")
      cfg.L_list = {8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096, 8192};
    else cfg.L_list = {64};
  }

  if (j.contains("d")) {
    cfg.d = j.at("d").get<std::int64_t>();
    if (cfg.d < 1) fail("d", "must be >= 1");
  }
  if (j.contains("trials")) {
    cfg.trials = j.at("trials").get<std::int64_t>();
    if (cfg.trials < 1) fail("trials", "must be >= 1");
  }
  if (j.contains("master_seed"))
    cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("step")) {
    cfg.step = get_number(j, "step");
    if (!(cfg.step > 0.0)) fail("step", "must be positive");
  }
  if (j.contains("tol")) {
    cfg.tol = get_number(j, "tol");
    if (!(cfg.tol > 0.0)) fail("tol", "must be positive");
  }
  if (j.contains("beta")) {
    cfg.beta = get_number(j, "beta");
    if (!(cfg.beta > 0.0 && cfg.beta < 1.0)) fail("beta", "must be in (0, 1)");
  }
  if (j.contains("c0")) {
    double c0 = get_number(j, "c0");
    if (!(std::fabs(c0) <= 1.0)) fail("c0", "must lie in [-1, 1]");
    cfg.c0 = c0;
  }
  if (j.contains("workers")) {
    cfg.workers = j.at("workers").get<std::int64_t>();
    if (cfg.workers < 1) fail("workers", "must be >= 1");
  }
  if (j.contains("output_dir"))
    cfg.output_dir = j.at("output_dir").get<std::string>();
  if (cfg.output_dir.empty()) {
    const char* env = std::getenv("COVFLOW_OUT");
    cfg.output_dir = env && *env ? env : ".";
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config file " + path + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& cfg) {
  json j;
  j["study"] = cfg.study;
  j["arch"] = cfg.arch;
  j["scaling"] = cfg.scaling;
  j["n_list"] = cfg.n_list;
  j["L_list"] = cfg.L_list;
  j["d"] = cfg.d;
  j["trials"] = cfg.trials;
  j["master_seed"] = cfg.master_seed;
  j["step"] = cfg.step;
  j["tol"] = cfg.tol;
  j["beta"] = cfg.beta;
  if (cfg.c0) j["c0"] = *cfg.c0;
  j["output_dir"] = cfg.output_dir;
  j["workers"] = cfg.workers;
  return j;
}

ArchConfig make_arch_config(const RunConfig& cfg) {
  ArchConfig ac;
  ac.arch = parse_arch(cfg.arch);
  ac.beta = cfg.beta;
  if (ac.arch == Arch::ScaledResNet) ac.seq = parse_scaling(cfg.scaling);
  return ac;
}

}  // namespace covflow
