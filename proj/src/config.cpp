#include "mlafem/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mlafem {

namespace {

using nlohmann::json;

void only_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + where + "." + key + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + where + "." + key + "'");
  }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  only_keys(root, "config", {"problem", "hierarchy", "solver", "afem", "sampling", "output"});
  RunConfig c;
  const json empty = json::object();
  auto section = [&](const char* name) -> const json& { return root.contains(name) ? root.at(name) : empty; };

  const json& p = section("problem");
  only_keys(p, "problem", {"kind", "load"});
  read(p, "kind", c.problem.kind, "problem");
  read(p, "load", c.problem.load, "problem");

  const json& h = section("hierarchy");
  only_keys(h, "hierarchy", {"coarse_nodes_per_side", "levels"});
  read(h, "coarse_nodes_per_side", c.hierarchy.coarse_nodes_per_side, "hierarchy");
  read(h, "levels", c.hierarchy.levels, "hierarchy");

  const json& s = section("solver");
  only_keys(s, "solver", {"tol", "max_sweeps", "omega_rule", "omega"});
  read(s, "tol", c.afem.solver.tol, "solver");
  read(s, "max_sweeps", c.afem.solver.max_sweeps, "solver");
  std::string rule = to_string(c.afem.solver.omega_rule);
  read(s, "omega_rule", rule, "solver");
  c.afem.solver.omega_rule = parse_omega_rule(rule);
  read(s, "omega", c.afem.solver.omega, "solver");

  const json& a = section("afem");
  only_keys(a, "afem", {"iterations", "marking"});
  read(a, "iterations", c.afem.iterations, "afem");
  const json& m = a.contains("marking") ? a.at("marking") : empty;
  only_keys(m, "afem.marking", {"strategy", "theta"});
  std::string strategy = to_string(c.afem.marking.strategy);
  read(m, "strategy", strategy, "afem.marking");
  c.afem.marking.strategy = parse_marking(strategy);
  read(m, "theta", c.afem.marking.theta, "afem.marking");

  const json& sm = section("sampling");
  only_keys(sm, "sampling", {"seed", "count"});
  read(sm, "seed", c.sampling.seed, "sampling");
  read(sm, "count", c.sampling.count, "sampling");

  const json& o = section("output");
  only_keys(o, "output", {"directory"});
  read(o, "directory", c.output_directory, "output");

  if (c.problem.kind != "cookie") throw ConfigError("unknown problem kind '" + c.problem.kind + "'");
  make_hierarchy(c);
  if (!(c.afem.solver.tol > 0.0)) throw ConfigError("solver.tol must be positive");
  if (c.afem.solver.max_sweeps < 1) throw ConfigError("solver.max_sweeps must be at least 1");
  if (c.afem.solver.omega_rule == OmegaRule::fixed && !(c.afem.solver.omega > 0.0))
    throw ConfigError("solver.omega must be positive for the fixed rule");
  if (c.afem.iterations < 1) throw ConfigError("afem.iterations must be at least 1");
  const double theta = c.afem.marking.theta;
  if (c.afem.marking.strategy == MarkingStrategy::doerfler ? !(theta > 0.0 && theta < 1.0) : !(theta > 0.0))
    throw ConfigError("afem.marking.theta out of range");
  if (c.sampling.count < 1) throw ConfigError("sampling.count must be at least 1");
  if (c.output_directory.empty()) throw ConfigError("output.directory must not be empty");
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["problem"] = {{"kind", c.problem.kind}, {"load", c.problem.load}};
  j["hierarchy"] = {{"coarse_nodes_per_side", c.hierarchy.coarse_nodes_per_side}, {"levels", c.hierarchy.levels}};
  j["solver"] = {{"tol", c.afem.solver.tol},
                 {"max_sweeps", c.afem.solver.max_sweeps},
                 {"omega_rule", to_string(c.afem.solver.omega_rule)},
                 {"omega", c.afem.solver.omega}};
  j["afem"] = {{"iterations", c.afem.iterations},
               {"marking", {{"strategy", to_string(c.afem.marking.strategy)}, {"theta", c.afem.marking.theta}}}};
  j["sampling"] = {{"seed", c.sampling.seed}, {"count", c.sampling.count}};
  j["output"] = {{"directory", c.output_directory}};
  return j.dump(2);
}

std::string config_hash(const RunConfig& config) {
  // The output location does not change any result.
  RunConfig c = config;
  c.output_directory = "-";
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_to_json(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

DiskField make_problem(const RunConfig& config) {
  DiskField p = cookie_problem();
  p.load = config.problem.load;
  return p;
}

GridHierarchy make_hierarchy(const RunConfig& config) {
  try {
    return build_hierarchy(config.hierarchy.coarse_nodes_per_side, config.hierarchy.levels);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("hierarchy: ") + e.what());
  }
}

}  // namespace mlafem
