#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlafem {

// Thrown for invalid user input or run configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when operands disagree in level, size or channel count.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown on divergence, breakdown or non-finite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Square n x n array indexed by (i1, i2), stored at i1 * n + i2.
template <class T>
class Lattice {
 public:
  Lattice() = default;
  explicit Lattice(int n, T value = T{}) : n_(n), data_(static_cast<std::size_t>(n) * n, value) {
    if (n < 0) throw ShapeError("negative lattice size");
  }

  int size() const { return n_; }
  bool contains(int i1, int i2) const { return i1 >= 0 && i2 >= 0 && i1 < n_ && i2 < n_; }

  T& operator()(int i1, int i2) { return data_[static_cast<std::size_t>(i1) * n_ + i2]; }
  const T& operator()(int i1, int i2) const { return data_[static_cast<std::size_t>(i1) * n_ + i2]; }

  // Zero outside the lattice.
  T get(int i1, int i2) const { return contains(i1, i2) ? (*this)(i1, i2) : T{}; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Lattice&, const Lattice&) = default;

 private:
  int n_ = 0;
  std::vector<T> data_;
};

using Image = Lattice<double>;
using Mask = Lattice<std::uint8_t>;
using Stack = std::vector<Image>;

inline void require_same_size(int a, int b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": size " + std::to_string(a) + " vs " + std::to_string(b));
}

double dot(const Image& a, const Image& b);
double max_abs(const Image& a);
Image masked(Image a, const Mask& m);
Image& axpy(double alpha, const Image& x, Image& y);  // y += alpha * x
Image operator+(const Image& a, const Image& b);
Image operator-(const Image& a, const Image& b);
std::size_t count(const Mask& m);

}  // namespace mlafem
