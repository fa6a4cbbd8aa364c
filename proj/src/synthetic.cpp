#include "radvote/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "radvote/error.hpp"

namespace radvote {

namespace {

void recentre(PointCloud& c) {
  const Point3 m = c.centroid();
  for (auto& p : c.points) p -= m;
}

// Samples the six faces of [lo, hi]; `keep` filters points.
template <typename Keep>
void add_box_faces(PointCloud& out, const Point3& lo, const Point3& hi, double spacing, Keep keep) {
  const Vector3 size = hi - lo;
  for (int axis = 0; axis < 3; ++axis) {
    const int a = (axis + 1) % 3;
    const int b = (axis + 2) % 3;
    const int na = std::max(1, static_cast<int>(std::ceil(size(a) / spacing)));
    const int nb = std::max(1, static_cast<int>(std::ceil(size(b) / spacing)));
    for (int side = 0; side < 2; ++side) {
      Vector3 n = Vector3::Zero();
      n(axis) = side ? 1.0 : -1.0;
      for (int i = 0; i < na; ++i) {
        for (int j = 0; j < nb; ++j) {
          Point3 p;
          p(axis) = side ? hi(axis) : lo(axis);
          p(a) = lo(a) + (i + 0.5) * size(a) / na;
          p(b) = lo(b) + (j + 0.5) * size(b) / nb;
          if (!keep(p)) continue;
          out.points.push_back(p);
          out.normals.push_back(n);
        }
      }
    }
  }
}

bool strictly_inside(const Point3& p, const Point3& lo, const Point3& hi) {
  return (p.array() > lo.array()).all() && (p.array() < hi.array()).all();
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct ObjectRecipe {
  ShapeKind shape;
  Vector3 dims;  // shape parameters before rescaling
  double target_rbar;
};

ObjectRecipe recipe(std::string_view name) {
  if (name == "ape") return {ShapeKind::LBracket, {80.0, 70.0, 45.0}, 61.2};
  if (name == "driller") return {ShapeKind::BoxShell, {50.0, 70.0, 245.0}, 129.4};
  if (name == "eggbox") return {ShapeKind::SphereShell, {80.0, 0.0, 0.0}, 82.5};
  throw ParameterError("unknown synthetic object '" + std::string(name) + "'");
}

PointCloud build_shape(ShapeKind shape, const Vector3& dims, double spacing) {
  switch (shape) {
    case ShapeKind::SphereShell:
      return sample_sphere_shell(dims.x(), spacing);
    case ShapeKind::BoxShell:
      return sample_box_shell(dims, spacing);
    case ShapeKind::LBracket:
      // dims = (leg length a, leg length b, width); plates are width / 3 thick.
      return sample_l_bracket(dims.x(), dims.y(), dims.z(), dims.z() / 3.0, spacing);
    case ShapeKind::Loaded:
      break;
  }
  throw ParameterError("build_shape: loaded models have no procedural recipe");
}

}  // namespace

PointCloud sample_sphere_shell(double radius, double spacing) {
  if (!(radius > 0.0) || !(spacing > 0.0)) throw ParameterError("sphere shell: radius and spacing must be positive");
  const auto n = static_cast<std::size_t>(std::ceil(4.0 * std::numbers::pi * radius * radius / (spacing * spacing)));
  PointCloud out;
  out.points.reserve(n);
  out.normals.reserve(n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double t = golden * static_cast<double>(i);
    const Vector3 d(r * std::cos(t), r * std::sin(t), z);
    out.points.push_back(radius * d);
    out.normals.push_back(d);
  }
  return out;
}

PointCloud sample_box_shell(const Vector3& size, double spacing) {
  if (!(size.array() > 0.0).all() || !(spacing > 0.0)) throw ParameterError("box shell: sizes and spacing must be positive");
  PointCloud out;
  add_box_faces(out, -0.5 * size, 0.5 * size, spacing, [](const Point3&) { return true; });
  return out;
}

PointCloud sample_l_bracket(double leg_a, double leg_b, double width, double thickness, double spacing) {
  if (!(leg_a > thickness) || !(leg_b > thickness) || !(width > 0.0) || !(thickness > 0.0) || !(spacing > 0.0)) {
    throw ParameterError("l-bracket: legs must exceed the plate thickness");
  }
  const Point3 a_lo(0, 0, 0), a_hi(leg_a, width, thickness);
  const Point3 b_lo(0, 0, 0), b_hi(thickness, width, leg_b);
  PointCloud out;
  add_box_faces(out, a_lo, a_hi, spacing, [&](const Point3& p) {
    return !strictly_inside(p, b_lo, b_hi) && !(p.z() == thickness && p.x() < thickness) && p.x() != 0.0;
  });
  add_box_faces(out, b_lo, b_hi, spacing, [&](const Point3& p) {
    return !strictly_inside(p, a_lo, a_hi) && !(p.x() == thickness && p.z() < thickness) && p.z() != 0.0 &&
           !((p.y() == 0.0 || p.y() == width) && p.z() < thickness);
  });
  recentre(out);
  return out;
}

double reference_mean_keypoint_distance(std::string_view name) { return recipe(name).target_rbar; }

SyntheticObject make_object(std::string_view name, double spacing) {
  const ObjectRecipe r = recipe(name);
  auto rbar = [](const PointCloud& c) { return fps_keypoints(c, 4).mean_distance_to(c.centroid()); };

  // Size the shape with a coarse sample, then resample at the final scale.
  const PointCloud coarse = build_shape(r.shape, r.dims, 4.0 * spacing);
  const Vector3 dims = r.dims * (r.target_rbar / rbar(coarse));
  PointCloud model = build_shape(r.shape, dims, spacing);
  recentre(model);
  const double s = r.target_rbar / rbar(model);
  for (auto& p : model.points) p *= s;

  SyntheticObject obj = object_from_model(std::string(name), std::move(model), r.shape == ShapeKind::SphereShell);
  obj.shape = r.shape;
  return obj;
}

SyntheticObject object_from_model(std::string name, PointCloud model, bool symmetric) {
  if (model.empty()) throw SizeError("object_from_model: empty model");
  SyntheticObject obj;
  obj.name = std::move(name);
  obj.shape = ShapeKind::Loaded;
  obj.model = std::move(model);
  obj.radius = object_radius(obj.model);
  obj.surface = fps_keypoints(obj.model, 4);
  const KeypointSet corners = bbox_keypoints(obj.model, 2.0);
  const auto pick = spread_subset(corners.keypoints, 4);
  obj.disperse = corners.subset(pick);
  obj.symmetric = symmetric;
  return obj;
}

Vector3 random_unit_vector(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  while (true) {
    const Vector3 v(g(rng), g(rng), g(rng));
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

RigidTransform random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  RigidTransform t;
  t.rotation = q.toRotationMatrix();
  return t;
}

RigidTransform random_object_pose(const PointCloud& model, const CameraIntrinsics& intrinsics, std::mt19937_64& rng,
                                  const SceneOptions& options) {
  intrinsics.validate();
  RigidTransform pose = random_rotation(rng);
  std::uniform_real_distribution<double> depth(options.min_depth, options.max_depth);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double z = depth(rng);
  const double hx = options.lateral_fraction * z * std::min(intrinsics.cx, intrinsics.width - intrinsics.cx) / intrinsics.fx;
  const double hy = options.lateral_fraction * z * std::min(intrinsics.cy, intrinsics.height - intrinsics.cy) / intrinsics.fy;
  const Point3 centre(unit(rng) * hx, unit(rng) * hy, z);
  pose.translation = centre - pose.rotation * model.centroid();
  return pose;
}

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ (index * 0xD1B54A32D192ED03ull));
}

}  // namespace radvote
