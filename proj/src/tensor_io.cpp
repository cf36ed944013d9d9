#include "mixinterp/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "mixinterp/errors.hpp"

namespace mixinterp {

static_assert(std::endian::native == std::endian::little, "payload is written in host order");

namespace {
constexpr const char* kMagic = "mixinterp-tensor/1";
}

void write_tensor_file(const TensorFile& file, const std::filesystem::path& path) {
  const std::size_t expected = static_cast<std::size_t>(file.channels) * file.height * file.width;
  if (file.channels <= 0 || file.height <= 0 || file.width <= 0 || file.data.size() != expected)
    throw std::invalid_argument("tensor file dimensions do not match the payload");
  for (const auto& [k, v] : file.meta) {
    if (k == "channels" || k == "height" || k == "width" || k.find('=') != std::string::npos ||
        k.find('\n') != std::string::npos || v.find('\n') != std::string::npos)
      throw std::invalid_argument("invalid tensor metadata key '" + k + "'");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kMagic << '\n';
  if (file.channels != 1) out << "channels=" << file.channels << '\n';
  out << "height=" << file.height << '\n' << "width=" << file.width << '\n';
  for (const auto& [k, v] : file.meta) out << k << '=' << v << '\n';
  out << "---\n";
  out.write(reinterpret_cast<const char*>(file.data.data()), static_cast<std::streamsize>(expected * sizeof(float)));
  if (!out) throw std::runtime_error("short write on " + path.string());
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("tensor file not found: " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kMagic) throw std::invalid_argument("not a tensor file: " + path.string());
  TensorFile file;
  bool terminated = false;
  while (std::getline(in, line)) {
    if (line == "---") {
      terminated = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("malformed tensor header line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "channels") file.channels = std::stoi(val);
    else if (key == "height") file.height = std::stoi(val);
    else if (key == "width") file.width = std::stoi(val);
    else file.meta[key] = val;
  }
  if (!terminated || file.channels <= 0 || file.height <= 0 || file.width <= 0)
    throw std::invalid_argument("incomplete tensor header: " + path.string());
  file.data.resize(static_cast<std::size_t>(file.channels) * file.height * file.width);
  in.read(reinterpret_cast<char*>(file.data.data()), static_cast<std::streamsize>(file.data.size() * sizeof(float)));
  if (!in) throw std::invalid_argument("truncated tensor payload: " + path.string());
  return file;
}

TensorFile to_tensor_file(const Map2d& map) {
  TensorFile f;
  f.height = map.height;
  f.width = map.width;
  f.data = map.values;
  return f;
}

TensorFile to_tensor_file(const Image& image) {
  TensorFile f;
  f.channels = image.channels;
  f.height = image.height;
  f.width = image.width;
  f.data = image.data;
  return f;
}

Map2d map_from_tensor_file(const TensorFile& file) {
  if (file.channels != 1) throw std::invalid_argument("expected a single-channel tensor file");
  Map2d m(file.height, file.width);
  m.values = file.data;
  return m;
}

Image image_from_tensor_file(const TensorFile& file) {
  Image img(file.channels, file.height, file.width);
  img.data = file.data;
  return img;
}

}  // namespace mixinterp
