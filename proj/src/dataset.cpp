#include "mlafem/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace mlafem {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "blobs are written in native order and must be little-endian");

std::string sanitize(const std::string& name) {
  std::string s = name;
  for (char& c : s)
    if (c == '/' || c == '\\' || c == ' ') c = '.';
  return s;
}

std::size_t elements(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string mode_name(ConvMode m) {
  switch (m) {
    case ConvMode::plain: return "plain";
    case ConvMode::strided2: return "strided2";
    case ConvMode::transpose_strided2: return "transpose_strided2";
    case ConvMode::submanifold: return "submanifold";
  }
  return "plain";
}

}  // namespace

std::size_t ArrayEntry::bytes() const {
  const std::size_t width = dtype == "float64" ? 8 : dtype == "uint8" ? 1 : 0;
  if (width == 0) throw ShapeError("unknown dtype '" + dtype + "'");
  return width * elements(shape);
}

DatasetWriter::DatasetWriter(std::filesystem::path directory, std::string config_hash, std::uint64_t seed)
    : dir_(std::move(directory)) {
  manifest_.config_hash = std::move(config_hash);
  manifest_.seed = seed;
  std::filesystem::create_directories(dir_);
}

void DatasetWriter::write_blob(const ArrayEntry& entry, const char* data) {
  if (finished_) throw ShapeError("dataset already finished");
  for (const auto& a : manifest_.arrays)
    if (a.name == entry.name) throw ShapeError("duplicate array '" + entry.name + "'");
  std::ofstream out(dir_ / entry.file, std::ios::binary | std::ios::trunc);
  out.write(data, static_cast<std::streamsize>(entry.bytes()));
  if (!out) throw std::runtime_error("cannot write " + (dir_ / entry.file).string());
  manifest_.arrays.push_back(entry);
}

void DatasetWriter::add(const std::string& name, const std::vector<std::size_t>& shape,
                        const std::vector<double>& values, int level, const std::string& channels) {
  ArrayEntry e{name, sanitize(name) + ".f64", "float64", shape, level, channels};
  if (elements(shape) != values.size()) throw ShapeError("array '" + name + "' does not match its shape");
  write_blob(e, reinterpret_cast<const char*>(values.data()));
}

void DatasetWriter::add(const std::string& name, const std::vector<std::size_t>& shape,
                        const std::vector<std::uint8_t>& values, int level, const std::string& channels) {
  ArrayEntry e{name, sanitize(name) + ".u8", "uint8", shape, level, channels};
  if (elements(shape) != values.size()) throw ShapeError("array '" + name + "' does not match its shape");
  write_blob(e, reinterpret_cast<const char*>(values.data()));
}

void DatasetWriter::add(const std::string& name, const Image& image, int level, const std::string& channels) {
  const auto n = static_cast<std::size_t>(image.size());
  add(name, {n, n}, image.data(), level, channels);
}

void DatasetWriter::add(const std::string& name, const Stack& stack, int level, const std::string& channels) {
  if (stack.empty()) throw ShapeError("empty stack '" + name + "'");
  const auto n = static_cast<std::size_t>(stack.front().size());
  std::vector<double> flat;
  for (const auto& c : stack) {
    require_same_size(c.size(), stack.front().size(), "stack channel");
    flat.insert(flat.end(), c.data().begin(), c.data().end());
  }
  add(name, {stack.size(), n, n}, flat, level, channels);
}

void DatasetWriter::add(const std::string& name, const Mask& mask, int level, const std::string& channels) {
  const auto n = static_cast<std::size_t>(mask.size());
  add(name, {n, n}, mask.data(), level, channels);
}

void DatasetWriter::add_kernel_bank(const StencilBank& bank) {
  std::vector<double> all;
  auto put = [&](const std::string& name, const ConvKernel& k) {
    if (!k.bias.empty()) throw ShapeError("bank kernels carry no bias");
    manifest_.kernels.push_back({name, mode_name(k.mode),
                                 {static_cast<std::size_t>(k.out_channels), static_cast<std::size_t>(k.in_channels),
                                  static_cast<std::size_t>(k.height), static_cast<std::size_t>(k.width)},
                                 {k.origin.i1, k.origin.i2},
                                 all.size()});
    all.insert(all.end(), k.weights.begin(), k.weights.end());
  };
  put("translation", bank.translation);
  for (std::size_t k = 0; k < bank.operators.size(); ++k)
    for (std::size_t l = 0; l < 6; ++l)
      put("operator.level" + std::to_string(k) + ".patch" + std::to_string(l + 1), bank.operators[k][l]);
  put("prolongation", bank.prolongation);
  put("restriction", bank.restriction);
  put("closure", bank.closure);
  put("upsilon_fine", bank.upsilon_fine);
  put("triangle_integral", bank.triangle_integral);
  put("triangle_sum", bank.triangle_sum);
  put("upsilon_gather", bank.upsilon_gather);
  put("gradient", bank.gradient);
  put("vertex_sum", bank.vertex_sum);
  put("edge_jump", bank.edge_jump);
  put("edge_ends", bank.edge_ends);
  put("jump_weights", bank.jump_weights);
  put("estimator_sum", bank.estimator_sum);
  put("fine_nodes", bank.fine_nodes);
  put("child_spread", bank.child_spread);
  put("refinement", bank.refinement);
  add("kernel_bank", {all.size()}, all, -1, "concatenated kernel weights, see kernels");
}

void DatasetWriter::finish() {
  if (finished_) return;
  json j;
  j["format"] = manifest_.format;
  j["version"] = manifest_.version;
  j["config_hash"] = manifest_.config_hash;
  j["seed"] = manifest_.seed;
  j["byte_order"] = "little";
  j["layout"] = "row-major";
  json arrays = json::array();
  for (const auto& a : manifest_.arrays)
    arrays.push_back({{"name", a.name},
                      {"file", a.file},
                      {"dtype", a.dtype},
                      {"shape", a.shape},
                      {"level", a.level},
                      {"channels", a.channels}});
  j["arrays"] = arrays;
  json kernels = json::array();
  for (const auto& k : manifest_.kernels)
    kernels.push_back(
        {{"name", k.name}, {"mode", k.mode}, {"shape", k.shape}, {"origin", k.origin}, {"offset", k.offset}});
  j["kernels"] = kernels;
  std::ofstream out(dir_ / "manifest.json", std::ios::trunc);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write manifest in " + dir_.string());
  finished_ = true;
}

DatasetReader::DatasetReader(std::filesystem::path directory) : dir_(std::move(directory)) {
  std::ifstream in(dir_ / "manifest.json");
  if (!in) throw ConfigError("no manifest.json in " + dir_.string());
  json j;
  try {
    j = json::parse(in);
    manifest_.format = j.at("format").get<std::string>();
    manifest_.version = j.at("version").get<int>();
    manifest_.config_hash = j.at("config_hash").get<std::string>();
    manifest_.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& a : j.at("arrays"))
      manifest_.arrays.push_back({a.at("name").get<std::string>(), a.at("file").get<std::string>(),
                                  a.at("dtype").get<std::string>(), a.at("shape").get<std::vector<std::size_t>>(),
                                  a.at("level").get<int>(), a.at("channels").get<std::string>()});
    for (const auto& k : j.at("kernels"))
      manifest_.kernels.push_back({k.at("name").get<std::string>(), k.at("mode").get<std::string>(),
                                   k.at("shape").get<std::vector<std::size_t>>(), k.at("origin").get<std::vector<int>>(),
                                   k.at("offset").get<std::size_t>()});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  if (manifest_.format != "MLFD") throw ConfigError("not an MLFD dataset");
  for (const auto& a : manifest_.arrays) {
    const auto p = dir_ / a.file;
    if (!std::filesystem::exists(p)) throw ConfigError("missing blob " + p.string());
    if (std::filesystem::file_size(p) != a.bytes())
      throw ConfigError("blob " + p.string() + " does not match the manifest shape");
  }
}

const ArrayEntry& DatasetReader::entry(const std::string& name) const {
  for (const auto& a : manifest_.arrays)
    if (a.name == name) return a;
  throw ConfigError("no array '" + name + "' in dataset");
}

std::vector<char> DatasetReader::raw(const ArrayEntry& e) const {
  std::ifstream in(dir_ / e.file, std::ios::binary);
  std::vector<char> buf(e.bytes());
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!in) throw ConfigError("cannot read " + (dir_ / e.file).string());
  return buf;
}

std::vector<double> DatasetReader::read_f64(const std::string& name) const {
  const auto& e = entry(name);
  if (e.dtype != "float64") throw ShapeError("array '" + name + "' is not float64");
  const auto buf = raw(e);
  std::vector<double> v(buf.size() / 8);
  std::memcpy(v.data(), buf.data(), buf.size());
  return v;
}

std::vector<std::uint8_t> DatasetReader::read_u8(const std::string& name) const {
  const auto& e = entry(name);
  if (e.dtype != "uint8") throw ShapeError("array '" + name + "' is not uint8");
  const auto buf = raw(e);
  return {buf.begin(), buf.end()};
}

Image DatasetReader::read_image(const std::string& name) const {
  const auto& e = entry(name);
  if (e.shape.size() != 2 || e.shape[0] != e.shape[1]) throw ShapeError("array '" + name + "' is not a square image");
  Image img(static_cast<int>(e.shape[0]));
  img.data() = read_f64(name);
  return img;
}

Stack DatasetReader::read_stack(const std::string& name) const {
  const auto& e = entry(name);
  if (e.shape.size() != 3 || e.shape[1] != e.shape[2]) throw ShapeError("array '" + name + "' is not a stack");
  const auto v = read_f64(name);
  const std::size_t per = e.shape[1] * e.shape[2];
  Stack s;
  for (std::size_t c = 0; c < e.shape[0]; ++c) {
    Image img(static_cast<int>(e.shape[1]));
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(c * per), v.begin() + static_cast<std::ptrdiff_t>((c + 1) * per),
              img.data().begin());
    s.push_back(std::move(img));
  }
  return s;
}

Mask DatasetReader::read_mask(const std::string& name) const {
  const auto& e = entry(name);
  if (e.shape.size() != 2 || e.shape[0] != e.shape[1]) throw ShapeError("array '" + name + "' is not a square mask");
  Mask m(static_cast<int>(e.shape[0]));
  m.data() = read_u8(name);
  return m;
}

}  // namespace mlafem
