#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mlafem/convnet.hpp"

namespace mlafem {

// One raw little-endian, row-major array file described by the manifest.
struct ArrayEntry {
  std::string name;
  std::string file;
  std::string dtype;  // "float64" or "uint8"
  std::vector<std::size_t> shape;
  int level = -1;     // -1 when the array is not tied to a level
  std::string channels;
  std::size_t bytes() const;
};

struct KernelEntry {
  std::string name;
  std::string mode;
  std::vector<std::size_t> shape;  // out, in, height, width
  std::vector<int> origin;
  std::size_t offset = 0;          // first weight within the bank array
};

struct Manifest {
  std::string format = "MLFD";
  int version = 1;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<ArrayEntry> arrays;
  std::vector<KernelEntry> kernels;
};

// Writes arrays as they are added and the manifest on finish().
class DatasetWriter {
 public:
  DatasetWriter(std::filesystem::path directory, std::string config_hash, std::uint64_t seed);

  void add(const std::string& name, const std::vector<std::size_t>& shape, const std::vector<double>& values,
           int level, const std::string& channels);
  void add(const std::string& name, const std::vector<std::size_t>& shape, const std::vector<std::uint8_t>& values,
           int level, const std::string& channels);
  void add(const std::string& name, const Image& image, int level, const std::string& channels);
  void add(const std::string& name, const Stack& stack, int level, const std::string& channels);
  void add(const std::string& name, const Mask& mask, int level, const std::string& channels);
  // Every kernel of the bank concatenated into one array.
  void add_kernel_bank(const StencilBank& bank);
  void finish();

 private:
  void write_blob(const ArrayEntry& entry, const char* data);
  std::filesystem::path dir_;
  Manifest manifest_;
  bool finished_ = false;
};

class DatasetReader {
 public:
  // Validates that every blob exists with exactly the announced size.
  explicit DatasetReader(std::filesystem::path directory);
  const Manifest& manifest() const { return manifest_; }
  const ArrayEntry& entry(const std::string& name) const;
  std::vector<double> read_f64(const std::string& name) const;
  std::vector<std::uint8_t> read_u8(const std::string& name) const;
  Image read_image(const std::string& name) const;
  Stack read_stack(const std::string& name) const;
  Mask read_mask(const std::string& name) const;

 private:
  std::vector<char> raw(const ArrayEntry& e) const;
  std::filesystem::path dir_;
  Manifest manifest_;
};

}  // namespace mlafem
