#include "mlafem/lattice.hpp"

#include <algorithm>
#include <cmath>

namespace mlafem {

double dot(const Image& a, const Image& b) {
  require_same_size(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

double max_abs(const Image& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

Image masked(Image a, const Mask& m) {
  require_same_size(a.size(), m.size(), "masked");
  for (std::size_t i = 0; i < a.data().size(); ++i)
    if (!m.data()[i]) a.data()[i] = 0.0;
  return a;
}

Image& axpy(double alpha, const Image& x, Image& y) {
  require_same_size(x.size(), y.size(), "axpy");
  for (std::size_t i = 0; i < x.data().size(); ++i) y.data()[i] += alpha * x.data()[i];
  return y;
}

Image operator+(const Image& a, const Image& b) {
  Image r = a;
  return axpy(1.0, b, r);
}

Image operator-(const Image& a, const Image& b) {
  Image r = a;
  return axpy(-1.0, b, r);
}

std::size_t count(const Mask& m) {
  return static_cast<std::size_t>(std::count_if(m.data().begin(), m.data().end(), [](auto v) { return v != 0; }));
}

}  // namespace mlafem
