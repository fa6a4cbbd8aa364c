#pragma once
// Procedural stand-in objects and scene sampling for the experiments.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "radvote/geometry.hpp"

namespace radvote {

enum class ShapeKind { SphereShell, BoxShell, LBracket, Loaded };

// Surface samples at roughly `spacing` mm, with outward normals, centred on
// the model centroid before any rescaling.
PointCloud sample_sphere_shell(double radius, double spacing);
PointCloud sample_box_shell(const Vector3& size, double spacing);
// Two perpendicular plates of the given thickness sharing one edge.
PointCloud sample_l_bracket(double leg_a, double leg_b, double width, double thickness, double spacing);

struct SyntheticObject {
  std::string name;
  ShapeKind shape = ShapeKind::SphereShell;
  PointCloud model;
  double radius = 0.0;      // object_radius(model)
  KeypointSet surface;      // 4 FPS keypoints
  KeypointSet disperse;     // 4 corners of the 2x scaled bounding box
  bool symmetric = false;   // scored with ADD-s instead of ADD
};

// Keypoint sets for an arbitrary model in its own frame.
SyntheticObject object_from_model(std::string name, PointCloud model, bool symmetric = false);

// "ape" (L-bracket), "driller" (box shell) and "eggbox" (sphere shell). The
// model is scaled so the surface keypoints' mean centroid distance equals the
// reference value of the LINEMOD object of the same name.
SyntheticObject make_object(std::string_view name, double spacing = 1.0);
double reference_mean_keypoint_distance(std::string_view name);

struct SceneOptions {
  double min_depth = 750.0;   // mm, object centroid distance range
  double max_depth = 1050.0;
  double lateral_fraction = 0.25;  // of the half field of view at that depth
};

// Uniform random rotation, centroid placed inside the view frustum.
RigidTransform random_object_pose(const PointCloud& model, const CameraIntrinsics& intrinsics, std::mt19937_64& rng,
                                  const SceneOptions& options = {});
RigidTransform random_rotation(std::mt19937_64& rng);
Vector3 random_unit_vector(std::mt19937_64& rng);

// Independent stream for trial `index` of a run seeded with `seed`.
std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace radvote
