#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mapless/picomap.hpp"

namespace mapless {

// Directory-of-frames layout:
//   poses.txt            one line per frame: `stamp tx ty tz qx qy qz qw`
//   depth_NNNNNN.u16     little-endian row-major uint16 depth in millimetres (0 = invalid)
//   intensity_NNNNNN.u8  row-major uint8 intensity
// Raster dimensions come from the CameraModel.
class FrameDirectoryWriter {
 public:
  explicit FrameDirectoryWriter(const std::filesystem::path& dir);

  void append(const DepthFrame& frame);
  std::size_t count() const { return count_; }

 private:
  std::filesystem::path dir_;
  std::ofstream poses_;
  std::size_t count_ = 0;
};

std::vector<DepthFrame> read_frame_directory(const std::filesystem::path& dir, const CameraModel& camera);

std::string depth_file_name(std::size_t index);
std::string intensity_file_name(std::size_t index);

}  // namespace mapless
