#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "radvote/geometry.hpp"
#include "radvote/vote_maps.hpp"

namespace radvote {

// Axis-aligned voxel lattice. Voxel (ix, iy, iz) spans
// origin + resolution * [ix, ix+1) x [iy, iy+1) x [iz, iz+1); linear indices
// run x-fastest.
struct GridGeometry {
  Point3 origin = Point3::Zero();
  double resolution = 1.0;
  std::array<int, 3> dims{1, 1, 1};

  std::size_t voxel_count() const noexcept {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  // One 4-byte count per voxel.
  std::uint64_t memory_bytes() const noexcept { return 4ull * voxel_count(); }
  std::size_t linear_index(int ix, int iy, int iz) const noexcept {
    return static_cast<std::size_t>(ix) + static_cast<std::size_t>(dims[0]) * (iy + static_cast<std::size_t>(dims[1]) * iz);
  }
  std::array<int, 3> voxel_coords(std::size_t linear) const noexcept;
  Point3 voxel_center(int ix, int iy, int iz) const;
  Point3 max_corner() const;
  std::optional<std::array<int, 3>> voxel_of(const Point3& p) const;
  bool contains(int ix, int iy, int iz) const noexcept {
    return ix >= 0 && iy >= 0 && iz >= 0 && ix < dims[0] && iy < dims[1] && iz < dims[2];
  }
  // Point expressed in voxel units relative to the origin.
  Vector3 to_grid(const Point3& p) const { return (p - origin) / resolution; }

  friend bool operator==(const GridGeometry& a, const GridGeometry& b) {
    return a.origin == b.origin && a.resolution == b.resolution && a.dims == b.dims;
  }
};

// Refuses lattices above 2^29 voxels (2 GiB of counts).
inline constexpr std::size_t kMaxGridVoxels = std::size_t{1} << 29;

class AccumulatorGrid {
 public:
  AccumulatorGrid() = default;
  explicit AccumulatorGrid(const GridGeometry& geometry);

  const GridGeometry& geometry() const noexcept { return geometry_; }
  std::span<const std::uint32_t> counts() const noexcept { return counts_; }
  std::span<std::uint32_t> counts() noexcept { return counts_; }
  std::uint32_t at(int ix, int iy, int iz) const { return counts_[geometry_.linear_index(ix, iy, iz)]; }
  std::uint64_t total() const noexcept;
  std::uint32_t max_count() const noexcept;

  // Votes that incremented nothing because they fell outside the lattice.
  std::uint64_t dropped_votes() const noexcept { return dropped_; }
  void add_dropped(std::uint64_t n) noexcept { dropped_ += n; }
  void clear();

  friend bool operator==(const AccumulatorGrid&, const AccumulatorGrid&) = default;

 private:
  GridGeometry geometry_;
  std::vector<std::uint32_t> counts_;
  std::uint64_t dropped_ = 0;
};

enum class GridShape { Box, Cube };

// Lattice over the points' bounding box padded by `max_radius` on every side.
// Dims are ceil(extent / resolution), at least 1. Cube uses the largest
// extent on all three axes, centred on the box.
GridGeometry grid_geometry_for(std::span<const Point3> points, double max_radius, double resolution,
                               GridShape shape = GridShape::Box);
AccumulatorGrid build_grid(const PointCloud& scene_points, double max_radius, double resolution,
                           GridShape shape = GridShape::Box);

enum class SphereRule {
  // Voxels whose centre lies within half a voxel of the sphere:
  // (r - 1/2)^2 <= d^2 < (r + 1/2)^2 in voxel units, rendered per z-slice as
  // an annulus whose width follows the slice's distance from the centre.
  Shell,
  // Per-slice arithmetic circle with radius rounded to half voxels:
  // (r_s - 1/2)^2 <= d^2 < (r_s + 1/2)^2 around the slice-centre circle.
  // One voxel thick, but steep parts of the sphere can fall between slices.
  AndresSlices,
  // Voxels whose cube meets the sphere surface: min corner distance <= r <=
  // max corner distance. Rendered slice by slice; no surface point is missed,
  // at the price of a thicker shell.
  Supercover,
};

struct SphereOptions {
  SphereRule rule = SphereRule::Shell;
  // Test hooks for mutation checks; the defaults are the exact definitions.
  double half_width = 0.5;          // voxels, annulus half-width (Shell, AndresSlices)
  double surface_tolerance = 0.0;   // voxels, widens the supercover shell
};

// Visitors receive linear voxel indices; each voxel is reported at most once
// per call. Both return the number of voxels visited.
using VoxelVisitor = std::function<void(std::size_t)>;
std::size_t for_each_sphere_voxel(const GridGeometry& g, const Point3& center, double radius,
                                  const SphereOptions& options, const VoxelVisitor& visit);
// Voxels crossed by the half-line center + a * direction, a > 0 (plus the
// voxel holding `origin` when it lies inside), by amortised 3D-DDA.
std::size_t for_each_ray_voxel(const GridGeometry& g, const Point3& origin, const Vector3& direction,
                               const VoxelVisitor& visit);

// Single-vote casts. Each returns the number of voxels incremented; a vote
// that increments nothing is counted as dropped on the grid.
// Offset votes land on point - offset, the keypoint under the point - keypoint
// convention.
std::size_t cast_offset_vote(AccumulatorGrid& grid, const Point3& point, const Vector3& offset);
// `direction` points from the pixel toward the keypoint (i.e. -m_v).
std::size_t cast_ray_vote(AccumulatorGrid& grid, const Point3& point, const Vector3& direction);
std::size_t cast_sphere_vote(AccumulatorGrid& grid, const Point3& center, double radius,
                             const SphereOptions& options = {});

struct CastOptions {
  SphereOptions sphere;
  unsigned threads = 1;
  // Cast at most this many votes, picked at evenly spaced positions in
  // row-major pixel order (0 casts every masked pixel).
  std::size_t max_votes = 0;
};

struct VoteStats {
  std::uint64_t votes = 0;       // votes cast
  std::uint64_t dropped = 0;     // votes that incremented no voxel
  std::uint64_t increments = 0;  // total voxel increments
  double wall_ms = 0.0;

  VoteStats& operator+=(const VoteStats& o) {
    votes += o.votes;
    dropped += o.dropped;
    increments += o.increments;
    wall_ms += o.wall_ms;
    return *this;
  }
};

// Every masked pixel with valid depth casts one vote of the map's scheme.
// Counts are identical for any thread count.
VoteStats cast_votes(AccumulatorGrid& grid, const VoteMap& map, const DepthFrame& frame,
                     const CastOptions& options = {});

struct PeakResult {
  Point3 location = Point3::Zero();
  std::uint32_t count = 0;
  bool refined = false;
  std::array<int, 3> voxel{0, 0, 0};
};

// Global maximum, ties to the smallest linear index. With `refine`, the
// location is the count-weighted centroid of the 3x3x3 neighbourhood.
PeakResult find_peak(const AccumulatorGrid& grid, bool refine = false);

// Element-wise sum; all grids must share one geometry.
AccumulatorGrid merge_grids(std::span<const AccumulatorGrid> grids);

// Debug dump: "RVAG", u32 version, f64 origin[3], f64 resolution, u32 dims[3],
// u64 dropped, then u32 counts x-fastest. Little-endian throughout.
inline constexpr std::uint32_t kGridBlobVersion = 1;
std::vector<std::uint8_t> serialize_grid(const AccumulatorGrid& grid);
AccumulatorGrid deserialize_grid(std::span<const std::uint8_t> bytes);
void save_grid_blob(const std::filesystem::path& path, const AccumulatorGrid& grid);
AccumulatorGrid load_grid_blob(const std::filesystem::path& path);

}  // namespace radvote
