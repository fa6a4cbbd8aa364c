#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace radvote {

// All lengths are millimeters.
using Point3 = Eigen::Vector3d;
using Vector3 = Eigen::Vector3d;

struct Pixel {
  int u = 0;
  int v = 0;
  double depth = 0.0;  // mm; 0 or NaN marks an invalid measurement
};

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  // Throws ParameterError when the pinhole model is ill-formed.
  void validate() const;

  bool contains(int u, int v) const noexcept {
    return u >= 0 && v >= 0 && u < width && v < height;
  }

  // Kinect intrinsics shipped with LINEMOD, 640x480.
  static CameraIntrinsics linemod();
};

Point3 backproject(const Pixel& pixel, const CameraIntrinsics& intrinsics);

// Continuous image coordinates (u, v) of a camera-frame point with z > 0.
Eigen::Vector2d project(const Point3& point, const CameraIntrinsics& intrinsics);

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vector3 translation = Vector3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_axis_angle(const Vector3& axis, double angle_rad,
                                        const Vector3& translation = Vector3::Zero());

  Point3 apply(const Point3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const;
  // (a * b).apply(p) == a.apply(b.apply(p))
  RigidTransform operator*(const RigidTransform& rhs) const;

  // R^T R = I and det R = +1 within `tol`.
  bool is_valid(double tol = 1e-9) const;
};

// Angle of the relative rotation a^-1 * b, radians.
double rotation_distance(const RigidTransform& a, const RigidTransform& b);

struct PointCloud {
  std::vector<Point3> points;
  std::vector<Vector3> normals;  // empty, or one per point

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  bool has_normals() const noexcept { return !normals.empty() && normals.size() == points.size(); }

  Point3 centroid() const;
  PointCloud transformed(const RigidTransform& pose) const;
};

// Max distance from the cloud centroid to any of its points.
double object_radius(const PointCloud& cloud);

enum class KeypointSelection { FPS, ScaledBBox };

struct KeypointSet {
  std::vector<Point3> keypoints;
  KeypointSelection selection_method = KeypointSelection::FPS;
  double dispersion_scale = 1.0;

  std::size_t size() const noexcept { return keypoints.size(); }
  double mean_distance_to(const Point3& centre) const;
  // Keeps the listed indices, in the given order.
  KeypointSet subset(std::span<const std::size_t> indices) const;
};

// Greedy max-min selection. Without a seed index the point farthest from the
// cloud centroid starts the set. Ties resolve to the smaller point index.
KeypointSet fps_keypoints(const PointCloud& cloud, std::size_t k,
                          std::optional<std::size_t> seed_index = std::nullopt);

// Eight corners of the axis-aligned box, scaled by `scale` about its centre.
// Corner i has x = max when bit 0 of i is set, y with bit 1, z with bit 2.
KeypointSet bbox_keypoints(const PointCloud& cloud, double scale);

// Indices of the k points maximizing their smallest pairwise distance;
// exhaustive, ties broken by lexicographic index order.
std::vector<std::size_t> spread_subset(std::span<const Point3> points, std::size_t k);

// Moves each keypoint along its ray from `centroid` to target_scale * object_radius.
KeypointSet disperse_keypoints(const KeypointSet& keypoints, const Point3& centroid,
                               double target_scale, double object_radius);

// True when the points span at least a line's worth of directions: the second
// singular value of the centered point matrix exceeds 1e-6 of the first.
bool is_non_collinear(std::span<const Point3> points);

// Least-squares rigid transform mapping src onto dst (uniform weights).
RigidTransform horn_solve(std::span<const Point3> src, std::span<const Point3> dst);

// Exact nearest-neighbour queries over a static point set.
class KdTree {
 public:
  explicit KdTree(std::span<const Point3> points);

  struct Hit {
    std::size_t index = 0;
    double squared_distance = 0.0;
  };
  // Ties resolve to the smaller point index.
  Hit nearest(const Point3& query) const;
  std::size_t size() const noexcept { return points_.size(); }

 private:
  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    int left = -1;
    int right = -1;
  };
  int build(std::size_t begin, std::size_t end, int depth);
  void search(int node, const Point3& q, Hit& best) const;

  std::vector<Point3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

struct IcpOptions {
  std::size_t max_iterations = 30;
  double tolerance_mm = 1e-4;  // stop once the mean residual improves by less
  double max_correspondence_mm = 10.0;  // two 5 mm voxels
};

struct IcpResult {
  RigidTransform pose;
  std::size_t iterations = 0;
  // residual_history[0] is the initial pose; entries never increase.
  std::vector<double> residual_history;

  double initial_residual() const { return residual_history.front(); }
  double final_residual() const { return residual_history.back(); }
};

// Mean distance from model points (under `pose`) to their nearest scene point.
double mean_residual(const PointCloud& model, const KdTree& scene_index,
                     const RigidTransform& pose);

// Point-to-point ICP registering `model` onto `scene`.
IcpResult icp_refine(const PointCloud& model, const PointCloud& scene,
                     const RigidTransform& init, const IcpOptions& options = {});

}  // namespace radvote
