#include "radvote/accumulator.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <mutex>
#include <thread>

#include "radvote/error.hpp"
#include "raster.hpp"

namespace radvote {

std::array<int, 3> GridGeometry::voxel_coords(std::size_t linear) const noexcept {
  const auto nx = static_cast<std::size_t>(dims[0]);
  const auto ny = static_cast<std::size_t>(dims[1]);
  return {static_cast<int>(linear % nx), static_cast<int>((linear / nx) % ny), static_cast<int>(linear / (nx * ny))};
}

Point3 GridGeometry::voxel_center(int ix, int iy, int iz) const {
  return origin + resolution * Vector3(ix + 0.5, iy + 0.5, iz + 0.5);
}

Point3 GridGeometry::max_corner() const {
  return origin + resolution * Vector3(dims[0], dims[1], dims[2]);
}

std::optional<std::array<int, 3>> GridGeometry::voxel_of(const Point3& p) const {
  const Vector3 g = to_grid(p);
  std::array<int, 3> v{};
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor(g(a));
    if (!(f >= 0.0) || !(f < dims[static_cast<std::size_t>(a)])) return std::nullopt;
    v[static_cast<std::size_t>(a)] = static_cast<int>(f);
  }
  return v;
}

AccumulatorGrid::AccumulatorGrid(const GridGeometry& geometry) : geometry_(geometry) {
  if (!(geometry.resolution > 0.0) || !std::isfinite(geometry.resolution)) {
    throw ParameterError("grid: resolution must be positive");
  }
  if (!geometry.origin.allFinite()) throw ParameterError("grid: origin must be finite");
  for (int d : geometry.dims)
    if (d < 1) throw SizeError("grid: every dimension must be >= 1");
  const double n = static_cast<double>(geometry.dims[0]) * geometry.dims[1] * geometry.dims[2];
  if (n > static_cast<double>(kMaxGridVoxels)) throw SizeError("grid: lattice exceeds the voxel cap");
  counts_.assign(geometry.voxel_count(), 0u);
}

std::uint64_t AccumulatorGrid::total() const noexcept {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint32_t AccumulatorGrid::max_count() const noexcept {
  return counts_.empty() ? 0u : *std::max_element(counts_.begin(), counts_.end());
}

void AccumulatorGrid::clear() {
  std::fill(counts_.begin(), counts_.end(), 0u);
  dropped_ = 0;
}

GridGeometry grid_geometry_for(std::span<const Point3> points, double max_radius, double resolution,
                               GridShape shape) {
  if (points.empty()) throw SizeError("grid: no points to bound");
  if (!(resolution > 0.0) || !std::isfinite(resolution)) throw ParameterError("grid: resolution must be positive");
  if (!(max_radius >= 0.0) || !std::isfinite(max_radius)) throw ParameterError("grid: padding must be >= 0");
  Point3 lo = points.front();
  Point3 hi = points.front();
  for (const auto& p : points) {
    if (!p.allFinite()) throw ParameterError("grid: non-finite point");
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  lo.array() -= max_radius;
  hi.array() += max_radius;
  Vector3 extent = hi - lo;
  if (shape == GridShape::Cube) {
    const double e = extent.maxCoeff();
    const Point3 mid = 0.5 * (lo + hi);
    lo = mid - Vector3::Constant(0.5 * e);
    extent = Vector3::Constant(e);
  }
  GridGeometry g;
  g.origin = lo;
  g.resolution = resolution;
  for (int a = 0; a < 3; ++a) {
    const double n = std::max(1.0, std::ceil(extent(a) / resolution));
    if (n > static_cast<double>(kMaxGridVoxels)) throw SizeError("grid: lattice exceeds the voxel cap");
    g.dims[static_cast<std::size_t>(a)] = static_cast<int>(n);
  }
  return g;
}

AccumulatorGrid build_grid(const PointCloud& scene_points, double max_radius, double resolution, GridShape shape) {
  return AccumulatorGrid(grid_geometry_for(scene_points.points, max_radius, resolution, shape));
}

std::size_t for_each_sphere_voxel(const GridGeometry& g, const Point3& center, double radius,
                                  const SphereOptions& options, const VoxelVisitor& visit) {
  return detail::sphere_voxels(g, center, radius, options, visit);
}

std::size_t for_each_ray_voxel(const GridGeometry& g, const Point3& origin, const Vector3& direction,
                               const VoxelVisitor& visit) {
  return detail::ray_voxels(g, origin, direction, visit);
}

namespace {

// Increment policy: plain for one writer, relaxed atomics when shared.
struct PlainInc {
  std::uint32_t* counts;
  void operator()(std::size_t i) const { ++counts[i]; }
};

struct AtomicInc {
  std::uint32_t* counts;
  void operator()(std::size_t i) const {
    std::atomic_ref<std::uint32_t>(counts[i]).fetch_add(1u, std::memory_order_relaxed);
  }
};

template <typename Inc>
std::size_t offset_vote(const GridGeometry& g, const Point3& point, const Vector3& offset, Inc inc) {
  const auto v = g.voxel_of(point - offset);
  if (!v) return 0;
  inc(g.linear_index((*v)[0], (*v)[1], (*v)[2]));
  return 1;
}

template <typename Inc>
std::size_t ray_vote(const GridGeometry& g, const Point3& point, const Vector3& direction, Inc inc) {
  return detail::ray_voxels(g, point, direction, inc);
}

template <typename Inc>
std::size_t sphere_vote(const GridGeometry& g, const Point3& center, double radius, const SphereOptions& o, Inc inc) {
  // A non-positive radius puts the keypoint on the pixel itself.
  if (radius <= 0.0) return offset_vote(g, center, Vector3::Zero(), inc);
  return detail::sphere_voxels(g, center, radius, o, inc);
}

template <typename Inc>
std::size_t cast_one(const GridGeometry& g, const VoteMap& map, const Point3& p, std::size_t o,
                     const SphereOptions& sphere, Inc inc) {
  const double* val = map.values.data() + o;
  switch (map.scheme) {
    case Scheme::Offset:
      return offset_vote(g, p, Vector3(val[0], val[1], val[2]), inc);
    case Scheme::Vector:
      return ray_vote(g, p, -Vector3(val[0], val[1], val[2]), inc);
    case Scheme::Polar:
      return ray_vote(g, p, -polar_to_unit(val[0], val[1]), inc);
    case Scheme::Radial:
      return sphere_vote(g, p, val[0], sphere, inc);
  }
  return 0;
}

}  // namespace

std::size_t cast_offset_vote(AccumulatorGrid& grid, const Point3& point, const Vector3& offset) {
  const std::size_t n = offset_vote(grid.geometry(), point, offset, PlainInc{grid.counts().data()});
  if (n == 0) grid.add_dropped(1);
  return n;
}

std::size_t cast_ray_vote(AccumulatorGrid& grid, const Point3& point, const Vector3& direction) {
  const std::size_t n = ray_vote(grid.geometry(), point, direction, PlainInc{grid.counts().data()});
  if (n == 0) grid.add_dropped(1);
  return n;
}

std::size_t cast_sphere_vote(AccumulatorGrid& grid, const Point3& center, double radius, const SphereOptions& options) {
  const std::size_t n = sphere_vote(grid.geometry(), center, radius, options, PlainInc{grid.counts().data()});
  if (n == 0) grid.add_dropped(1);
  return n;
}

VoteStats cast_votes(AccumulatorGrid& grid, const VoteMap& map, const DepthFrame& frame, const CastOptions& options) {
  const int w = frame.depth.width;
  const int h = frame.depth.height;
  if (map.width != w || map.height != h || !map.mask.same_shape(w, h)) {
    throw SizeError("cast_votes: map and depth frame differ in size");
  }
  if (grid.counts().empty()) throw ParameterError("cast_votes: grid has no storage");
  const auto start = std::chrono::steady_clock::now();

  std::vector<std::size_t> pixels;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      if (map.masked(u, v) && frame.valid(u, v)) pixels.push_back(frame.depth.index(u, v));

  if (options.max_votes > 0 && pixels.size() > options.max_votes) {
    std::vector<std::size_t> picked(options.max_votes);
    const std::size_t n = pixels.size();
    for (std::size_t i = 0; i < options.max_votes; ++i) picked[i] = pixels[i * n / options.max_votes];
    pixels = std::move(picked);
  }

  const GridGeometry& g = grid.geometry();
  std::uint32_t* counts = grid.counts().data();
  const auto depth = static_cast<std::size_t>(map.depth());

  auto run = [&](std::size_t begin, std::size_t end, auto inc, VoteStats& st) {
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t idx = pixels[k];
      const int u = static_cast<int>(idx % static_cast<std::size_t>(w));
      const int v = static_cast<int>(idx / static_cast<std::size_t>(w));
      const Point3 p = backproject({u, v, frame.depth.data[idx]}, frame.intrinsics);
      const std::size_t n = cast_one(g, map, p, idx * depth, options.sphere, inc);
      ++st.votes;
      st.increments += n;
      if (n == 0) ++st.dropped;
    }
  };

  VoteStats stats;
  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(pixels.size())));
  if (threads <= 1) {
    run(0, pixels.size(), PlainInc{counts}, stats);
  } else {
    std::vector<VoteStats> part(threads);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = pixels.size() * t / threads;
      const std::size_t e = pixels.size() * (t + 1) / threads;
      pool.emplace_back([&, b, e, t] {
        try {
          run(b, e, AtomicInc{counts}, part[t]);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    for (const auto& s : part) stats += s;
  }
  grid.add_dropped(stats.dropped);
  stats.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return stats;
}

PeakResult find_peak(const AccumulatorGrid& grid, bool refine) {
  const auto counts = grid.counts();
  if (counts.empty()) throw NoPeakError("find_peak: empty grid");
  std::size_t best = 0;
  for (std::size_t i = 1; i < counts.size(); ++i)
    if (counts[i] > counts[best]) best = i;
  if (counts[best] == 0) throw NoPeakError("find_peak: accumulator holds no votes");

  const GridGeometry& g = grid.geometry();
  PeakResult out;
  out.count = counts[best];
  out.voxel = g.voxel_coords(best);
  out.location = g.voxel_center(out.voxel[0], out.voxel[1], out.voxel[2]);
  if (!refine) return out;

  Vector3 acc = Vector3::Zero();
  double mass = 0.0;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = out.voxel[0] + dx, y = out.voxel[1] + dy, z = out.voxel[2] + dz;
        if (!g.contains(x, y, z)) continue;
        const double c = grid.at(x, y, z);
        acc += c * g.voxel_center(x, y, z);
        mass += c;
      }
  out.location = acc / mass;
  out.refined = true;
  return out;
}

AccumulatorGrid merge_grids(std::span<const AccumulatorGrid> grids) {
  if (grids.empty()) throw SizeError("merge_grids: nothing to merge");
  AccumulatorGrid out(grids.front().geometry());
  auto dst = out.counts();
  for (const auto& grid : grids) {
    if (!(grid.geometry() == out.geometry())) throw IncompatibleGridError("merge_grids: grid geometries differ");
    const auto src = grid.counts();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      const std::uint64_t s = std::uint64_t{dst[i]} + src[i];
      if (s > std::numeric_limits<std::uint32_t>::max()) throw NumericalError("merge_grids: count overflow");
      dst[i] = static_cast<std::uint32_t>(s);
    }
    out.add_dropped(grid.dropped_votes());
  }
  return out;
}

// ---------------------------------------------------------------- blob

namespace {

static_assert(std::endian::native == std::endian::little, "grid blobs assume a little-endian host");
constexpr char kMagic[4] = {'R', 'V', 'A', 'G'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 3 * 8 + 8 + 3 * 4 + 8;

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* b = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), b, b + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> in, std::size_t& pos) {
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_grid(const AccumulatorGrid& grid) {
  const GridGeometry& g = grid.geometry();
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 4 * g.voxel_count());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put(out, kGridBlobVersion);
  for (int a = 0; a < 3; ++a) put(out, g.origin(a));
  put(out, g.resolution);
  for (int d : g.dims) put(out, static_cast<std::uint32_t>(d));
  put(out, grid.dropped_votes());
  const auto counts = grid.counts();
  const auto* b = reinterpret_cast<const std::uint8_t*>(counts.data());
  out.insert(out.end(), b, b + counts.size_bytes());
  return out;
}

AccumulatorGrid deserialize_grid(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) throw BlobFormatError("grid blob: truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw BlobFormatError("grid blob: bad magic");
  std::size_t pos = 4;
  if (get<std::uint32_t>(bytes, pos) != kGridBlobVersion) throw BlobFormatError("grid blob: unsupported version");
  GridGeometry g;
  for (int a = 0; a < 3; ++a) g.origin(a) = get<double>(bytes, pos);
  g.resolution = get<double>(bytes, pos);
  for (auto& d : g.dims) {
    const auto v = get<std::uint32_t>(bytes, pos);
    if (v == 0 || v > kMaxGridVoxels) throw BlobFormatError("grid blob: bad dimension");
    d = static_cast<int>(v);
  }
  const auto dropped = get<std::uint64_t>(bytes, pos);
  if (static_cast<double>(g.dims[0]) * g.dims[1] * g.dims[2] > static_cast<double>(kMaxGridVoxels)) {
    throw BlobFormatError("grid blob: lattice exceeds the voxel cap");
  }
  if (bytes.size() != kHeaderBytes + 4 * g.voxel_count()) throw BlobFormatError("grid blob: payload size mismatch");
  if (!(g.resolution > 0.0) || !std::isfinite(g.resolution) || !g.origin.allFinite()) {
    throw BlobFormatError("grid blob: bad geometry");
  }
  AccumulatorGrid grid(g);
  std::memcpy(grid.counts().data(), bytes.data() + pos, 4 * g.voxel_count());
  grid.add_dropped(dropped);
  return grid;
}

void save_grid_blob(const std::filesystem::path& path, const AccumulatorGrid& grid) {
  const auto bytes = serialize_grid(grid);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

AccumulatorGrid load_grid_blob(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_grid(bytes);
}

}  // namespace radvote
