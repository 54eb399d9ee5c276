#include "mapless/frame_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "mapless/error.hpp"

namespace mapless {

namespace {

std::string numbered(const char* prefix, std::size_t index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%06zu.%s", prefix, index, ext);
  return buf;
}

std::uint16_t to_millimetres(float depth) {
  if (!(depth > 0.0f) || !std::isfinite(depth)) return 0;
  const double mm = std::round(double(depth) * 1000.0);
  return static_cast<std::uint16_t>(std::clamp(mm, 1.0, 65535.0));
}

}  // namespace

std::string depth_file_name(std::size_t index) { return numbered("depth", index, "u16"); }
std::string intensity_file_name(std::size_t index) { return numbered("intensity", index, "u8"); }

FrameDirectoryWriter::FrameDirectoryWriter(const std::filesystem::path& dir) : dir_(dir) {
  std::filesystem::create_directories(dir_);
  poses_.open(dir_ / "poses.txt");
  if (!poses_) throw Error(ErrorCode::io, "cannot open " + (dir_ / "poses.txt").string());
  poses_ << std::setprecision(17);
}

void FrameDirectoryWriter::append(const DepthFrame& frame) {
  {
    std::ofstream out(dir_ / depth_file_name(count_), std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "cannot write depth raster");
    for (float d : frame.depth) {
      const std::uint16_t mm = to_millimetres(d);
      const unsigned char bytes[2] = {static_cast<unsigned char>(mm & 0xff), static_cast<unsigned char>(mm >> 8)};
      out.write(reinterpret_cast<const char*>(bytes), 2);
    }
  }
  {
    std::ofstream out(dir_ / intensity_file_name(count_), std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "cannot write intensity raster");
    out.write(reinterpret_cast<const char*>(frame.intensity.data()), static_cast<std::streamsize>(frame.intensity.size()));
  }
  const Eigen::Quaterniond q(frame.pose.linear());
  const Vec3 t = frame.pose.translation();
  poses_ << frame.stamp << ' ' << t.x() << ' ' << t.y() << ' ' << t.z() << ' ' << q.x() << ' ' << q.y() << ' '
         << q.z() << ' ' << q.w() << '\n';
  poses_.flush();
  ++count_;
}

std::vector<DepthFrame> read_frame_directory(const std::filesystem::path& dir, const CameraModel& camera) {
  std::ifstream poses(dir / "poses.txt");
  if (!poses) throw Error(ErrorCode::io, "missing poses.txt in " + dir.string());

  std::vector<DepthFrame> frames;
  const std::size_t n = camera.pixel_count();
  std::string line;
  while (std::getline(poses, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double stamp, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> stamp >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
      throw Error(ErrorCode::io, "malformed pose line: " + line);
    }
    const std::size_t index = frames.size();
    DepthFrame frame;
    frame.width = camera.width;
    frame.height = camera.height;
    frame.stamp = stamp;
    frame.pose = make_pose({tx, ty, tz}, Eigen::Quaterniond(qw, qx, qy, qz));

    std::ifstream depth(dir / depth_file_name(index), std::ios::binary);
    std::vector<unsigned char> raw(2 * n);
    if (!depth.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
      throw Error(ErrorCode::io, "short depth raster " + depth_file_name(index));
    }
    frame.depth.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint16_t mm = static_cast<std::uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
      frame.depth[i] = mm == 0 ? 0.0f : static_cast<float>(mm / 1000.0);
    }

    std::ifstream intensity(dir / intensity_file_name(index), std::ios::binary);
    frame.intensity.resize(n);
    if (!intensity.read(reinterpret_cast<char*>(frame.intensity.data()), static_cast<std::streamsize>(n))) {
      throw Error(ErrorCode::io, "short intensity raster " + intensity_file_name(index));
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

}  // namespace mapless
