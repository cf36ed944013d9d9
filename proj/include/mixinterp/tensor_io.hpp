#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mixinterp/tensor.hpp"

namespace mixinterp {

// Portable tensor file:
//
//   mixinterp-tensor/1
//   channels=<c>          (omitted for single-channel maps)
//   height=<h>
//   width=<w>
//   <key>=<value>         (free-form metadata, e.g. method, class, normalized)
//   ---
//   <c*h*w little-endian float32 values, channel-major then row-major>
struct TensorFile {
  int channels = 1;
  int height = 0;
  int width = 0;
  std::map<std::string, std::string> meta;
  std::vector<float> data;
};

void write_tensor_file(const TensorFile& file, const std::filesystem::path& path);
TensorFile read_tensor_file(const std::filesystem::path& path);

TensorFile to_tensor_file(const Map2d& map);
TensorFile to_tensor_file(const Image& image);
Map2d map_from_tensor_file(const TensorFile& file);
Image image_from_tensor_file(const TensorFile& file);

}  // namespace mixinterp
