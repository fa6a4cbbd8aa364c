#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "radvote/config.hpp"
#include "radvote/geometry.hpp"
#include "radvote/vote_maps.hpp"

namespace radvote {

// PLY vertex clouds. Only the "vertex" element is read (x, y, z and optional
// nx, ny, nz as float or double); other elements must follow it. Coordinates
// are multiplied by `units_to_mm`, which has no default on purpose.
enum class PlyFormat { Ascii, BinaryLittleEndian };
PointCloud parse_ply(std::span<const std::uint8_t> bytes, double units_to_mm);
PointCloud load_ply(const std::filesystem::path& path, double units_to_mm);
// Writes float64 coordinates (and normals when present), mm.
std::vector<std::uint8_t> serialize_ply(const PointCloud& cloud, PlyFormat format);
void save_ply(const std::filesystem::path& path, const PointCloud& cloud, PlyFormat format = PlyFormat::BinaryLittleEndian);

// 16-bit single-channel PNG depth; stored value * depth_scale = mm, 0 invalid.
Image<double> decode_depth_png16(std::span<const std::uint8_t> bytes, double depth_scale = 1.0);
Image<double> load_depth_png16(const std::filesystem::path& path, double depth_scale = 1.0);
// Depth is rounded to the nearest stored unit; non-positive and non-finite
// pixels are written as 0. Values above 65535 units are rejected.
std::vector<std::uint8_t> encode_depth_png16(const Image<double>& depth, double depth_scale = 1.0);
void save_depth_png16(const std::filesystem::path& path, const Image<double>& depth, double depth_scale = 1.0);

// Pose files: one "object_id r11 r12 r13 t1 r21 r22 r23 t2 r31 r32 r33 t3"
// record per line ([R|t] row-major, mm); '#' starts a comment.
struct PoseRecord {
  std::string object_id;
  RigidTransform pose;
};
std::vector<PoseRecord> parse_poses(std::string_view text);
std::vector<PoseRecord> load_poses(const std::filesystem::path& path);
std::string format_poses(std::span<const PoseRecord> records);
void save_poses(const std::filesystem::path& path, std::span<const PoseRecord> records);

struct DatasetEntry {
  std::filesystem::path model_path;
  std::optional<std::filesystem::path> depth_path;
  RigidTransform gt_pose;
  CameraIntrinsics intrinsics;
  std::string object_id;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace radvote
