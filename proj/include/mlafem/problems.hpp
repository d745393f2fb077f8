#pragma once

#include <cstdint>
#include <vector>

#include "mlafem/mesh.hpp"

namespace mlafem {

struct Disk {
  Point center;
  double radius = 0.0;
};

// kappa(x, y) = base + sum_j y_j [x in closed disk j]; constant load f.
struct DiskField {
  double base = 0.1;
  std::vector<Disk> disks;
  double load = 1.0;
};

DiskField cookie_problem();

using Parameter = std::vector<double>;

double kappa_at(const DiskField& problem, const Parameter& y, Point x);

// Nodal interpolant on the finest level of the hierarchy.
Image discretize_kappa(const DiskField& problem, const Parameter& y, const GridHierarchy& grid);
Image discretize_load(const DiskField& problem, const GridHierarchy& grid);

// Counter-based generator: value i of stream s is splitmix64(seed, s, i).
class SampleRng {
 public:
  explicit SampleRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  std::uint64_t next();
  double uniform();  // [0, 1)
  // Independent generator for sub-stream s.
  SampleRng split(std::uint64_t s) const;
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

std::vector<Parameter> sample_parameters(SampleRng& rng, int count, int dimension = 2);

}  // namespace mlafem
