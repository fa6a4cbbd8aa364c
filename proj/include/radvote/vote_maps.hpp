#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "radvote/geometry.hpp"

namespace radvote {

// Row-major single-channel image.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t index(int u, int v) const noexcept { return static_cast<std::size_t>(v) * width + u; }
  T& operator()(int u, int v) { return data[index(u, v)]; }
  const T& operator()(int u, int v) const { return data[index(u, v)]; }
  bool same_shape(int w, int h) const noexcept { return width == w && height == h; }
  friend bool operator==(const Image&, const Image&) = default;
};

using Mask = Image<std::uint8_t>;

// Depth image in mm plus the camera that produced it; 0 marks invalid pixels.
struct DepthFrame {
  CameraIntrinsics intrinsics;
  Image<double> depth;

  bool valid(int u, int v) const {
    const double d = depth(u, v);
    return d > 0.0 && std::isfinite(d);
  }
};

enum class Scheme { Offset, Vector, Polar, Radial };

constexpr int channel_depth(Scheme s) noexcept {
  switch (s) {
    case Scheme::Offset:
    case Scheme::Vector:
      return 3;
    case Scheme::Polar:
      return 2;
    case Scheme::Radial:
      return 1;
  }
  return 0;
}

std::string_view to_string(Scheme s) noexcept;
// Accepts the lower-case names ("offset", "vector", "polar", "radial").
Scheme parse_scheme(std::string_view name);

inline constexpr std::array<Scheme, 4> kAllSchemes{Scheme::Radial, Scheme::Offset, Scheme::Vector,
                                                    Scheme::Polar};

struct SchemeValue {
  std::array<double, 3> c{};
  int depth = 0;

  double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
};

// Per-pixel quantity relating `point` to `keypoint`. Offset is point - keypoint,
// Vector its normalisation, Polar (acos dz, atan2(dy, dx)) of that vector and
// Radial its length.
SchemeValue compute_scheme_value(Scheme scheme, const Point3& point, const Point3& keypoint);

// Unit vector (dx, dy, dz) for polar angles (phi, psi).
Vector3 polar_to_unit(double phi, double psi);

// Per-pixel scheme values with a segmentation mask. Values of unmasked pixels
// are kept (they are the unsegmented estimate) but never voted.
struct VoteMap {
  Scheme scheme = Scheme::Radial;
  int width = 0;
  int height = 0;
  std::vector<double> values;  // width * height * channel_depth(scheme)
  Mask mask;

  VoteMap() = default;
  VoteMap(Scheme s, int w, int h);

  int depth() const noexcept { return channel_depth(scheme); }
  std::size_t offset(int u, int v) const noexcept {
    return (static_cast<std::size_t>(v) * width + u) * static_cast<std::size_t>(depth());
  }
  double value(int u, int v, int channel = 0) const { return values[offset(u, v) + channel]; }
  void set(int u, int v, const SchemeValue& sv);
  SchemeValue at(int u, int v) const;
  bool masked(int u, int v) const { return mask(u, v) != 0; }
  std::size_t mask_count() const;
};

struct GroundTruthRender {
  DepthFrame frame;
  std::vector<VoteMap> maps;  // one per keypoint, sharing frame.depth and mask
};

// Z-buffered point rendering of `model` under `pose`; one pixel per point,
// nearest point wins. Every masked pixel carries the scheme value between its
// back-projected point and pose * keypoint.
GroundTruthRender generate_gt_maps(const PointCloud& model, const RigidTransform& pose,
                                   const KeypointSet& keypoints, const CameraIntrinsics& intrinsics,
                                   Scheme scheme);

// Scheme maps for an already rendered frame. Pixels are masked where `mask`
// is set and the depth is valid.
std::vector<VoteMap> compute_maps(const DepthFrame& frame, const Mask& mask,
                                  std::span<const Point3> camera_keypoints, Scheme scheme);

struct NoiseSpec {
  enum class Kind { GaussianPerChannel, UniformPerChannel };
  Kind kind = Kind::GaussianPerChannel;
  // Standard deviation (Gaussian) or half-width (uniform) per channel, in the
  // channel's own unit: mm for offset and radial, unitless for vector, radians
  // for polar. A shorter vector repeats its last entry.
  std::vector<double> magnitude;
  double mask_flip_rate = 0.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
  bool is_zero() const;
  double channel(int c) const;
};

// Perturbs masked values per channel and flips mask bits; vector outputs are
// renormalised, polar outputs re-canonicalised and radial outputs kept > 0.
VoteMap apply_noise(const VoteMap& map, const NoiseSpec& spec);

// Mean absolute difference over all N pixels.
double loss_s(const Image<double>& predicted_mask, const Mask& gt_mask);

// Masked mean absolute error (channels summed per pixel). A predicted pixel
// outside its own mask contributes zeros, i.e. the segmented estimate.
double loss_m1(const VoteMap& predicted, const VoteMap& ground_truth);

// Removes `fraction` of the masked pixels with a half-plane cut whose normal
// points along `angle_rad` in the image plane.
Mask occlude_half_plane(const Mask& mask, double fraction, double angle_rad);

}  // namespace radvote
