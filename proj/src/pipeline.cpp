#include "radvote/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "radvote/error.hpp"

namespace radvote {

GridGeometry search_geometry(const DepthFrame& frame, double margin, double resolution, GridShape shape) {
  std::vector<Point3> pts;
  for (int v = 0; v < frame.depth.height; ++v)
    for (int u = 0; u < frame.depth.width; ++u)
      if (frame.valid(u, v)) pts.push_back(backproject({u, v, frame.depth(u, v)}, frame.intrinsics));
  if (pts.empty()) throw InvalidDepthError("search_geometry: frame has no valid depth");
  return grid_geometry_for(pts, margin, resolution, shape);
}

GridGeometry centred_cube_geometry(const DepthFrame& frame, double extent, double resolution) {
  if (!(extent > 0.0) || !(resolution > 0.0)) throw ParameterError("centred_cube_geometry: extent and resolution must be positive");
  Vector3 sum = Vector3::Zero();
  std::size_t n = 0;
  for (int v = 0; v < frame.depth.height; ++v)
    for (int u = 0; u < frame.depth.width; ++u)
      if (frame.valid(u, v)) {
        sum += backproject({u, v, frame.depth(u, v)}, frame.intrinsics);
        ++n;
      }
  if (n == 0) throw InvalidDepthError("centred_cube_geometry: frame has no valid depth");
  GridGeometry g;
  g.resolution = resolution;
  const int d = std::max(1, static_cast<int>(std::ceil(extent / resolution)));
  g.dims = {d, d, d};
  g.origin = sum / static_cast<double>(n) - Vector3::Constant(0.5 * d * resolution);
  return g;
}

GridGeometry window_geometry(const GridGeometry& full, const Point3& centre, double half_width) {
  GridGeometry w;
  w.resolution = full.resolution;
  const Vector3 lo = full.to_grid(centre - Vector3::Constant(half_width));
  const Vector3 hi = full.to_grid(centre + Vector3::Constant(half_width));
  for (int a = 0; a < 3; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    const int i0 = std::clamp(static_cast<int>(std::floor(lo(a))), 0, full.dims[ua] - 1);
    const int i1 = std::clamp(static_cast<int>(std::ceil(hi(a))), i0 + 1, full.dims[ua]);
    w.origin(a) = full.origin(a) + i0 * full.resolution;
    w.dims[ua] = i1 - i0;
  }
  return w;
}

namespace {

VoteStats cast_all(AccumulatorGrid& grid, const DepthFrame& frame, std::span<const VoteMap> maps,
                   const CastOptions& cast) {
  VoteStats stats;
  for (const auto& m : maps) stats += cast_votes(grid, m, frame, cast);
  return stats;
}

// Voxels holding the global maximum in linear order, dropping any within
// window_factor - 1 voxels (Chebyshev) of an earlier kept one: a dropped voxel
// lies wholly inside that candidate's window. At most kMaxPeakCandidates.
std::vector<std::array<int, 3>> peak_candidates(const AccumulatorGrid& grid, double window_factor) {
  std::vector<std::array<int, 3>> out;
  const std::uint32_t top = grid.max_count();
  const auto counts = grid.counts();
  const double reach = window_factor - 1.0;
  for (std::size_t i = 0; i < counts.size() && out.size() < kMaxPeakCandidates; ++i) {
    if (counts[i] != top) continue;
    const auto v = grid.geometry().voxel_coords(i);
    const bool covered = std::any_of(out.begin(), out.end(), [&](const std::array<int, 3>& c) {
      return std::abs(v[0] - c[0]) <= reach && std::abs(v[1] - c[1]) <= reach && std::abs(v[2] - c[2]) <= reach;
    });
    if (!covered) out.push_back(v);
  }
  return out;
}

}  // namespace

KeypointVote localize_keypoint(const DepthFrame& frame, std::span<const VoteMap> maps,
                               const LocalizationOptions& options) {
  if (maps.empty()) throw SizeError("localize_keypoint: no vote maps");
  if (!(options.resolution > 0.0)) throw ParameterError("localize_keypoint: resolution must be positive");
  KeypointVote out;
  if (options.fixed_extent > 0.0) {
    AccumulatorGrid grid(centred_cube_geometry(frame, options.fixed_extent, options.resolution));
    out.stats += cast_all(grid, frame, maps, options.cast);
    const PeakResult p = find_peak(grid, options.refine);
    out.location = p.location;
    out.peak_count = p.count;
    out.geometry = grid.geometry();
    out.memory_bytes = out.geometry.memory_bytes();
    return out;
  }
  const GridGeometry full = search_geometry(frame, options.search_margin, options.resolution);
  if (!(options.coarse_resolution > options.resolution)) {
    AccumulatorGrid grid(full);
    out.stats += cast_all(grid, frame, maps, options.cast);
    const PeakResult p = find_peak(grid, options.refine);
    out.location = p.location;
    out.peak_count = p.count;
    out.geometry = full;
    out.memory_bytes = full.memory_bytes();
    return out;
  }

  // Coarse shells are widened so that every sphere through a point reaches
  // the voxel containing it; that voxel then holds the maximum count, so the
  // true peak is always among the tied maxima.
  CastOptions coarse_cast = options.cast;
  if (coarse_cast.sphere.rule != SphereRule::Supercover) {
    coarse_cast.sphere.rule = SphereRule::Shell;
    coarse_cast.sphere.half_width = std::max(coarse_cast.sphere.half_width, kCoarseShellHalfWidth);
  }
  AccumulatorGrid coarse(search_geometry(frame, options.search_margin, options.coarse_resolution));
  out.memory_bytes += coarse.geometry().memory_bytes();
  out.stats += cast_all(coarse, frame, maps, coarse_cast);
  const std::vector<std::array<int, 3>> seeds = peak_candidates(coarse, options.window_factor);

  // Each distinct tied maximum gets a fine window; the highest fine peak wins,
  // ties to the earlier candidate.
  bool have = false;
  for (const auto& s : seeds) {
    const GridGeometry target = window_geometry(full, coarse.geometry().voxel_center(s[0], s[1], s[2]),
                                                options.window_factor * options.coarse_resolution);
    AccumulatorGrid grid(target);
    out.stats += cast_all(grid, frame, maps, options.cast);
    out.memory_bytes += target.memory_bytes();
    const PeakResult p = find_peak(grid, options.refine);
    if (!have || p.count > out.peak_count) {
      out.location = p.location;
      out.peak_count = p.count;
      out.geometry = target;
      have = true;
    }
  }
  return out;
}

KeypointVote localize_keypoint(const DepthFrame& frame, const VoteMap& map, const LocalizationOptions& options) {
  return localize_keypoint(frame, std::span<const VoteMap>(&map, 1), options);
}

std::vector<KeypointVote> estimate_keypoints(const DepthFrame& frame, std::span<const VoteMap> maps,
                                             const LocalizationOptions& options) {
  if (maps.size() < 3) throw SizeError("estimate_keypoints: at least 3 keypoint maps required");
  std::vector<KeypointVote> out;
  out.reserve(maps.size());
  for (const auto& m : maps) out.push_back(localize_keypoint(frame, m, options));
  return out;
}

RigidTransform recover_pose(const KeypointSet& object_keypoints, std::span<const Point3> estimated) {
  return horn_solve(object_keypoints.keypoints, estimated);
}

double add_metric(const PointCloud& model, const RigidTransform& gt, const RigidTransform& est) {
  if (model.empty()) throw SizeError("add_metric: empty model");
  double sum = 0.0;
  for (const auto& p : model.points) sum += (gt.apply(p) - est.apply(p)).norm();
  return sum / static_cast<double>(model.size());
}

double adds_metric(const PointCloud& model, const RigidTransform& gt, const RigidTransform& est) {
  if (model.empty()) throw SizeError("adds_metric: empty model");
  const PointCloud moved = model.transformed(est);
  double sum = 0.0;
  if (model.size() > kAddsTreeThreshold) {
    const KdTree tree(moved.points);
    for (const auto& p : model.points) sum += std::sqrt(tree.nearest(gt.apply(p)).squared_distance);
  } else {
    for (const auto& p : model.points) {
      const Point3 q = gt.apply(p);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& m : moved.points) best = std::min(best, (q - m).squaredNorm());
      sum += std::sqrt(best);
    }
  }
  return sum / static_cast<double>(model.size());
}

double accuracy_at_threshold(std::span<const double> values, double object_radius, double fraction) {
  if (values.empty()) throw SizeError("accuracy_at_threshold: no values");
  if (!(fraction > 0.0)) throw ParameterError("accuracy_at_threshold: fraction must be positive");
  const double t = fraction * object_radius;
  const auto hits = std::count_if(values.begin(), values.end(), [t](double d) { return d < t; });
  return static_cast<double>(hits) / static_cast<double>(values.size());
}

double auc_metric(std::span<const double> values, double max_threshold) {
  if (values.empty()) throw SizeError("auc_metric: no values");
  if (!(max_threshold > 0.0)) throw ParameterError("auc_metric: max_threshold must be positive");
  double sum = 0.0;
  for (double d : values) sum += std::max(0.0, max_threshold - d) / max_threshold;
  return sum / static_cast<double>(values.size());
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  double s = 0.0;
  for (double v : values) s += v;
  out.mean = s / static_cast<double>(values.size());
  double q = 0.0;
  for (double v : values) q += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(q / static_cast<double>(values.size()));
  return out;
}

}  // namespace radvote
