#include "mlafem/problems.hpp"

#include <string>

#include "mlafem/lattice.hpp"

namespace mlafem {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

DiskField cookie_problem() {
  DiskField p;
  p.base = 0.1;
  p.disks = {Disk{{0.75, 0.25}, 0.15}, Disk{{0.75, 0.75}, 0.15}};
  p.load = 1.0;
  return p;
}

double kappa_at(const DiskField& problem, const Parameter& y, Point x) {
  if (y.size() != problem.disks.size())
    throw ConfigError("parameter has " + std::to_string(y.size()) + " entries, expected " +
                      std::to_string(problem.disks.size()));
  double k = problem.base;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double dx = x.x - problem.disks[j].center.x;
    const double dy = x.y - problem.disks[j].center.y;
    const double r = problem.disks[j].radius;
    // Closed disks; the slack absorbs rounding of points placed on the circle.
    if (dx * dx + dy * dy <= r * r * (1.0 + 1e-12)) k += y[j];
  }
  return k;
}

Image discretize_kappa(const DiskField& problem, const Parameter& y, const GridHierarchy& grid) {
  const int L = grid.finest();
  const int n = grid.nodes_per_side(L);
  Image img(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) img(a, b) = kappa_at(problem, y, grid.coordinate(L, {a, b}));
  return img;
}

Image discretize_load(const DiskField& problem, const GridHierarchy& grid) {
  return Image(grid.nodes_per_side(grid.finest()), problem.load);
}

std::uint64_t SampleRng::next() {
  const std::uint64_t key = splitmix64(seed_ ^ splitmix64(stream_ + 0x632BE59BD9B4E019ULL));
  return splitmix64(key + 0x9E3779B97F4A7C15ULL * counter_++);
}

double SampleRng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

SampleRng SampleRng::split(std::uint64_t s) const { return SampleRng(seed_, splitmix64(stream_) ^ (s + 1)); }

std::vector<Parameter> sample_parameters(SampleRng& rng, int count, int dimension) {
  if (count < 0) throw ConfigError("sample count must be non-negative");
  std::vector<Parameter> out(static_cast<std::size_t>(count), Parameter(static_cast<std::size_t>(dimension)));
  for (auto& y : out)
    for (auto& v : y) v = rng.uniform();
  return out;
}

}  // namespace mlafem
