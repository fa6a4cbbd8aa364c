#pragma once

#include <span>
#include <vector>

#include "radvote/accumulator.hpp"
#include "radvote/geometry.hpp"
#include "radvote/vote_maps.hpp"

namespace radvote {

// Coarse-pass shell half-width in voxels; above sqrt(3)/2, the largest distance
// from a voxel centre to a point inside it.
inline constexpr double kCoarseShellHalfWidth = 0.87;
inline constexpr std::size_t kMaxPeakCandidates = 8;

struct LocalizationOptions {
  double resolution = 5.0;  // mm, final voxel edge
  // Coarse pre-pass over the whole search box; the fine lattice is then only
  // instantiated in windows of +-window_factor coarse voxels around the tied
  // coarse maxima. 0 (or any value <= resolution) votes once at full resolution.
  double coarse_resolution = 8.0;
  double window_factor = 4.0;
  // Padding of the visible points' bounding box; must reach the keypoints.
  double search_margin = 0.0;
  // > 0: a single-pass cube of this edge centred on the mean visible point
  // replaces the padded box and the coarse pass.
  double fixed_extent = 0.0;
  bool refine = false;
  CastOptions cast;
};

struct KeypointVote {
  Point3 location = Point3::Zero();
  std::uint32_t peak_count = 0;
  VoteStats stats;         // summed over both passes
  GridGeometry geometry;   // lattice of the final pass
  std::uint64_t memory_bytes = 0;  // counts allocated over both passes
};

// Cube of edge `extent` centred on the mean valid-depth point; dims
// ceil(extent / resolution).
GridGeometry centred_cube_geometry(const DepthFrame& frame, double extent, double resolution);

// Search lattice shared by every scheme for one frame: bounding box of all
// valid-depth points padded by `margin`.
GridGeometry search_geometry(const DepthFrame& frame, double margin, double resolution,
                             GridShape shape = GridShape::Box);

// Fine sub-lattice of `full` covering centre +- half_width, aligned with the
// voxels of `full` and clipped to it.
GridGeometry window_geometry(const GridGeometry& full, const Point3& centre, double half_width);

// All maps vote into one accumulator (a single map, or an ensemble of schemes
// for the same keypoint).
KeypointVote localize_keypoint(const DepthFrame& frame, std::span<const VoteMap> maps,
                               const LocalizationOptions& options);
KeypointVote localize_keypoint(const DepthFrame& frame, const VoteMap& map, const LocalizationOptions& options);

// One map per keypoint, at least three.
std::vector<KeypointVote> estimate_keypoints(const DepthFrame& frame, std::span<const VoteMap> maps,
                                             const LocalizationOptions& options);

// Pose mapping the object-frame keypoints onto their estimates.
RigidTransform recover_pose(const KeypointSet& object_keypoints, std::span<const Point3> estimated);

struct PoseEstimate {
  RigidTransform pose;
  std::vector<double> per_keypoint_error;  // mm
  Scheme scheme = Scheme::Radial;
  bool refined_with_icp = false;
};

double add_metric(const PointCloud& model, const RigidTransform& gt, const RigidTransform& est);
// Nearest-neighbour search switches to a k-d tree above this many points.
inline constexpr std::size_t kAddsTreeThreshold = 512;
double adds_metric(const PointCloud& model, const RigidTransform& gt, const RigidTransform& est);

// Share of values strictly below fraction * object_radius.
double accuracy_at_threshold(std::span<const double> values, double object_radius, double fraction = 0.10);
// Area under the accuracy-vs-threshold curve over [0, max_threshold],
// normalised to [0, 1]: mean of max(0, T - d) / T.
double auc_metric(std::span<const double> values, double max_threshold = 100.0);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // population
};
MeanStd mean_std(std::span<const double> values);

struct EvalReport {
  std::vector<double> add_values;
  std::vector<double> adds_values;
  std::vector<double> keypoint_errors;
  double accuracy = 0.0;
  double auc = 0.0;
  MeanStd kp_error;
};

}  // namespace radvote
