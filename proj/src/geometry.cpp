#include "radvote/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <Eigen/Eigenvalues>

#include "radvote/error.hpp"

namespace radvote {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ParameterError("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ParameterError("intrinsics: image size must be positive");
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height)) {
    throw ParameterError("intrinsics: principal point outside the image");
  }
}

CameraIntrinsics CameraIntrinsics::linemod() {
  return {572.4114, 573.57043, 325.2611, 242.04899, 640, 480};
}

Point3 backproject(const Pixel& pixel, const CameraIntrinsics& intrinsics) {
  const double d = pixel.depth;
  if (!std::isfinite(d) || d <= 0.0) {
    throw InvalidDepthError("backproject: depth must be positive and finite, got " + std::to_string(d));
  }
  return {(pixel.u - intrinsics.cx) * d / intrinsics.fx, (pixel.v - intrinsics.cy) * d / intrinsics.fy, d};
}

Eigen::Vector2d project(const Point3& point, const CameraIntrinsics& intrinsics) {
  if (!(point.z() > 0.0)) throw InvalidDepthError("project: point behind the camera");
  return {intrinsics.fx * point.x() / point.z() + intrinsics.cx,
          intrinsics.fy * point.y() / point.z() + intrinsics.cy};
}

RigidTransform RigidTransform::from_axis_angle(const Vector3& axis, double angle_rad,
                                               const Vector3& translation) {
  RigidTransform t;
  t.rotation = Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
  t.translation = translation;
  return t;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  RigidTransform out;
  out.rotation = rotation * rhs.rotation;
  out.translation = rotation * rhs.translation + translation;
  return out;
}

bool RigidTransform::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

double rotation_distance(const RigidTransform& a, const RigidTransform& b) {
  const Eigen::Matrix3d rel = a.rotation.transpose() * b.rotation;
  return Eigen::AngleAxisd(rel).angle();
}

Point3 PointCloud::centroid() const {
  if (points.empty()) throw SizeError("centroid of an empty cloud");
  Point3 sum = Point3::Zero();
  for (const auto& p : points) sum += p;
  return sum / static_cast<double>(points.size());
}

PointCloud PointCloud::transformed(const RigidTransform& pose) const {
  PointCloud out;
  out.points.reserve(points.size());
  for (const auto& p : points) out.points.push_back(pose.apply(p));
  if (has_normals()) {
    out.normals.reserve(normals.size());
    for (const auto& n : normals) out.normals.push_back(pose.rotation * n);
  }
  return out;
}

double object_radius(const PointCloud& cloud) {
  const Point3 c = cloud.centroid();
  double r = 0.0;
  for (const auto& p : cloud.points) r = std::max(r, (p - c).norm());
  return r;
}

double KeypointSet::mean_distance_to(const Point3& centre) const {
  if (keypoints.empty()) throw SizeError("mean distance of an empty keypoint set");
  double sum = 0.0;
  for (const auto& k : keypoints) sum += (k - centre).norm();
  return sum / static_cast<double>(keypoints.size());
}

KeypointSet KeypointSet::subset(std::span<const std::size_t> indices) const {
  KeypointSet out{{}, selection_method, dispersion_scale};
  for (std::size_t i : indices) {
    if (i >= keypoints.size()) throw SizeError("keypoint subset index out of range");
    out.keypoints.push_back(keypoints[i]);
  }
  return out;
}

KeypointSet fps_keypoints(const PointCloud& cloud, std::size_t k, std::optional<std::size_t> seed_index) {
  const std::size_t n = cloud.size();
  if (n == 0) throw SizeError("fps_keypoints: empty cloud");
  if (k > n) {
    throw SizeError("fps_keypoints: requested " + std::to_string(k) + " keypoints from " +
                    std::to_string(n) + " points");
  }
  KeypointSet out{{}, KeypointSelection::FPS, 1.0};
  if (k == 0) return out;

  std::size_t seed;
  if (seed_index) {
    if (*seed_index >= n) throw SizeError("fps_keypoints: seed index out of range");
    seed = *seed_index;
  } else {
    const Point3 c = cloud.centroid();
    seed = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (cloud.points[i] - c).squaredNorm();
      if (d > best) {
        best = d;
        seed = i;
      }
    }
  }

  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(n, 0);
  std::size_t current = seed;
  for (std::size_t step = 0; step < k; ++step) {
    chosen[current] = 1;
    out.keypoints.push_back(cloud.points[current]);
    if (step + 1 == k) break;
    const Point3& last = cloud.points[current];
    std::size_t next = n;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      min_d[i] = std::min(min_d[i], (cloud.points[i] - last).squaredNorm());
      if (min_d[i] > best) {
        best = min_d[i];
        next = i;
      }
    }
    current = next;
  }
  return out;
}

KeypointSet bbox_keypoints(const PointCloud& cloud, double scale) {
  if (cloud.empty()) throw SizeError("bbox_keypoints: empty cloud");
  if (!(scale >= 1.0)) throw ParameterError("bbox_keypoints: scale must be >= 1");
  Point3 lo = cloud.points.front();
  Point3 hi = lo;
  for (const auto& p : cloud.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  if (((hi - lo).array() <= 0.0).any()) throw DegeneracyError("bbox_keypoints: zero-extent bounding box");
  const Point3 centre = 0.5 * (lo + hi);
  const Vector3 half = 0.5 * scale * (hi - lo);
  KeypointSet out{{}, KeypointSelection::ScaledBBox, scale};
  for (int i = 0; i < 8; ++i) {
    const Vector3 sign((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
    out.keypoints.push_back(centre + sign.cwiseProduct(half));
  }
  return out;
}

std::vector<std::size_t> spread_subset(std::span<const Point3> points, std::size_t k) {
  const std::size_t n = points.size();
  if (k > n) throw SizeError("spread_subset: k exceeds the number of points");
  if (n > 24) throw SizeError("spread_subset: exhaustive search limited to 24 points");
  std::vector<std::size_t> best;
  if (k == 0) return best;
  if (k == 1) return {0};

  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  double best_score = -1.0;
  while (true) {
    double score = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b)
        score = std::min(score, (points[idx[a]] - points[idx[b]]).norm());
    if (score > best_score) {
      best_score = score;
      best = idx;
    }
    // next combination in lexicographic order
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return best;
}

KeypointSet disperse_keypoints(const KeypointSet& keypoints, const Point3& centroid, double target_scale,
                               double object_radius) {
  if (!(target_scale > 0.0)) throw ParameterError("disperse_keypoints: target_scale must be positive");
  if (!(object_radius > 0.0)) throw ParameterError("disperse_keypoints: object_radius must be positive");
  KeypointSet out{{}, keypoints.selection_method, target_scale};
  const double target = target_scale * object_radius;
  for (const auto& k : keypoints.keypoints) {
    const Vector3 ray = k - centroid;
    const double len = ray.norm();
    if (len == 0.0) throw DegeneracyError("disperse_keypoints: keypoint coincides with the centroid");
    out.keypoints.push_back(centroid + ray * (target / len));
  }
  return out;
}

namespace {

Eigen::Vector3d centered_singular_values(std::span<const Point3> points) {
  Point3 mean = Point3::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const auto& p : points) scatter += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter, Eigen::EigenvaluesOnly);
  Eigen::Vector3d ev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();  // ascending
  return {ev(2), ev(1), ev(0)};
}

}  // namespace

bool is_non_collinear(std::span<const Point3> points) {
  if (points.size() < 3) return false;
  const Eigen::Vector3d s = centered_singular_values(points);
  return s(0) > 0.0 && s(1) > 1e-6 * s(0);
}

RigidTransform horn_solve(std::span<const Point3> src, std::span<const Point3> dst) {
  if (src.size() != dst.size()) throw SizeError("horn_solve: point count mismatch");
  if (src.size() < 3) throw SizeError("horn_solve: at least 3 correspondences required");
  if (!is_non_collinear(src)) throw RankError("horn_solve: source points are collinear or coincident");

  const double n = static_cast<double>(src.size());
  Point3 cs = Point3::Zero();
  Point3 cd = Point3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= n;
  cd /= n;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) cov += (src[i] - cs) * (dst[i] - cd).transpose();

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;

  RigidTransform out;
  out.rotation = v * d * u.transpose();
  out.translation = cd - out.rotation * cs;
  return out;
}

// ---------------------------------------------------------------- KdTree

KdTree::KdTree(std::span<const Point3> points) : points_(points.begin(), points.end()) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) build(0, points_.size(), 0);
}

int KdTree::build(std::size_t begin, std::size_t end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end, -1, 0.0, -1, -1});
  constexpr std::size_t kLeafSize = 8;
  if (end - begin <= kLeafSize || depth > 64) return id;

  Point3 lo = points_[order_[begin]];
  Point3 hi = lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis;
  const double spread = (hi - lo).maxCoeff(&axis);
  if (spread <= 0.0) return id;

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::size_t a, std::size_t b) { return points_[a](axis) < points_[b](axis); });
  const double split = points_[order_[mid]](axis);
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(int node_id, const Point3& q, Hit& best) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = order_[i];
      const double d = (points_[idx] - q).squaredNorm();
      if (d < best.squared_distance || (d == best.squared_distance && idx < best.index)) {
        best = {idx, d};
      }
    }
    return;
  }
  const double delta = q(node.axis) - node.split;
  const int near = delta < 0.0 ? node.left : node.right;
  const int far = delta < 0.0 ? node.right : node.left;
  search(near, q, best);
  // Points equal to the split value may sit on either side.
  if (delta * delta <= best.squared_distance) search(far, q, best);
}

KdTree::Hit KdTree::nearest(const Point3& query) const {
  if (points_.empty()) throw SizeError("KdTree::nearest on an empty tree");
  Hit best{points_.size(), std::numeric_limits<double>::infinity()};
  search(0, query, best);
  return best;
}

// ---------------------------------------------------------------- ICP

double mean_residual(const PointCloud& model, const KdTree& scene_index, const RigidTransform& pose) {
  double sum = 0.0;
  for (const auto& p : model.points) sum += std::sqrt(scene_index.nearest(pose.apply(p)).squared_distance);
  return sum / static_cast<double>(model.size());
}

IcpResult icp_refine(const PointCloud& model, const PointCloud& scene, const RigidTransform& init,
                     const IcpOptions& options) {
  if (model.empty() || scene.empty()) throw SizeError("icp_refine: empty cloud");
  if (!init.is_valid(1e-6)) throw ParameterError("icp_refine: initial pose is not a rigid transform");

  const KdTree index(scene.points);
  IcpResult result{init, 0, {mean_residual(model, index, init)}};
  const double gate2 = options.max_correspondence_mm * options.max_correspondence_mm;

  std::vector<Point3> src;
  std::vector<Point3> dst;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    if (result.final_residual() <= 1e-12) break;
    src.clear();
    dst.clear();
    for (const auto& p : model.points) {
      const auto hit = index.nearest(result.pose.apply(p));
      if (hit.squared_distance <= gate2) {
        src.push_back(p);
        dst.push_back(scene.points[hit.index]);
      }
    }
    if (src.size() < 3 || !is_non_collinear(src)) break;

    const RigidTransform candidate = horn_solve(src, dst);
    const double residual = mean_residual(model, index, candidate);
    if (residual > result.final_residual()) break;  // only non-increasing steps are accepted
    const double gain = result.final_residual() - residual;
    result.pose = candidate;
    result.residual_history.push_back(residual);
    result.iterations = it + 1;
    if (gain < options.tolerance_mm) break;
  }
  return result;
}

}  // namespace radvote
