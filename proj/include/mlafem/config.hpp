#pragma once

#include <cstdint>
#include <string>

#include "mlafem/adapt.hpp"
#include "mlafem/problems.hpp"

namespace mlafem {

struct ProblemConfig {
  std::string kind = "cookie";
  double load = 1.0;
};

struct HierarchyConfig {
  int coarse_nodes_per_side = 5;
  int levels = 4;
};

struct SamplingConfig {
  std::uint64_t seed = 0;
  int count = 100;
};

struct RunConfig {
  ProblemConfig problem;
  HierarchyConfig hierarchy;
  AfemConfig afem;
  SamplingConfig sampling;
  std::string output_directory = "out";
};

// JSON text; missing keys take the defaults above, unknown keys are errors.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
// Canonical JSON with every key present.
std::string config_to_json(const RunConfig& config);
// FNV-1a of the canonical JSON without the output directory, as 16 hex digits.
std::string config_hash(const RunConfig& config);

DiskField make_problem(const RunConfig& config);
GridHierarchy make_hierarchy(const RunConfig& config);

}  // namespace mlafem
