#include "radvote/vote_maps.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "radvote/error.hpp"

namespace radvote {

std::string_view to_string(Scheme s) noexcept {
  switch (s) {
    case Scheme::Offset:
      return "offset";
    case Scheme::Vector:
      return "vector";
    case Scheme::Polar:
      return "polar";
    case Scheme::Radial:
      return "radial";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  for (Scheme s : kAllSchemes)
    if (to_string(s) == name) return s;
  throw ParameterError("unknown voting scheme '" + std::string(name) + "'");
}

SchemeValue compute_scheme_value(Scheme scheme, const Point3& point, const Point3& keypoint) {
  const Vector3 offset = point - keypoint;
  SchemeValue out;
  out.depth = channel_depth(scheme);
  switch (scheme) {
    case Scheme::Offset:
      out.c = {offset.x(), offset.y(), offset.z()};
      return out;
    case Scheme::Radial:
      out.c[0] = offset.norm();
      return out;
    case Scheme::Vector:
    case Scheme::Polar:
      break;
  }
  const double len = offset.norm();
  if (len == 0.0) throw DegeneracyError("compute_scheme_value: direction undefined for coincident points");
  const Vector3 dir = offset / len;
  if (scheme == Scheme::Vector) {
    out.c = {dir.x(), dir.y(), dir.z()};
    return out;
  }
  double psi = std::atan2(dir.y(), dir.x());
  if (psi <= -std::numbers::pi) psi = std::numbers::pi;
  out.c[0] = std::acos(std::clamp(dir.z(), -1.0, 1.0));
  out.c[1] = psi;
  return out;
}

Vector3 polar_to_unit(double phi, double psi) {
  const double s = std::sin(phi);
  return {s * std::cos(psi), s * std::sin(psi), std::cos(phi)};
}

VoteMap::VoteMap(Scheme s, int w, int h)
    : scheme(s),
      width(w),
      height(h),
      values(static_cast<std::size_t>(w) * h * channel_depth(s), 0.0),
      mask(w, h, 0) {}

void VoteMap::set(int u, int v, const SchemeValue& sv) {
  const std::size_t o = offset(u, v);
  for (int c = 0; c < depth(); ++c) values[o + c] = sv[c];
}

SchemeValue VoteMap::at(int u, int v) const {
  SchemeValue sv;
  sv.depth = depth();
  const std::size_t o = offset(u, v);
  for (int c = 0; c < depth(); ++c) sv.c[static_cast<std::size_t>(c)] = values[o + c];
  return sv;
}

std::size_t VoteMap::mask_count() const {
  return static_cast<std::size_t>(std::count_if(mask.data.begin(), mask.data.end(), [](auto m) { return m != 0; }));
}

std::vector<VoteMap> compute_maps(const DepthFrame& frame, const Mask& mask, std::span<const Point3> camera_keypoints,
                                  Scheme scheme) {
  const int w = frame.depth.width;
  const int h = frame.depth.height;
  if (!mask.same_shape(w, h)) throw SizeError("compute_maps: mask and depth differ in size");
  std::vector<VoteMap> maps;
  maps.reserve(camera_keypoints.size());
  for (std::size_t j = 0; j < camera_keypoints.size(); ++j) maps.emplace_back(scheme, w, h);

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (!mask(u, v) || !frame.valid(u, v)) continue;
      const Point3 p = backproject({u, v, frame.depth(u, v)}, frame.intrinsics);
      for (std::size_t j = 0; j < camera_keypoints.size(); ++j) {
        maps[j].set(u, v, compute_scheme_value(scheme, p, camera_keypoints[j]));
        maps[j].mask(u, v) = 1;
      }
    }
  }
  return maps;
}

GroundTruthRender generate_gt_maps(const PointCloud& model, const RigidTransform& pose, const KeypointSet& keypoints,
                                   const CameraIntrinsics& intrinsics, Scheme scheme) {
  intrinsics.validate();
  GroundTruthRender out;
  out.frame.intrinsics = intrinsics;
  out.frame.depth = Image<double>(intrinsics.width, intrinsics.height, 0.0);
  auto& depth = out.frame.depth;

  for (const auto& p : model.points) {
    const Point3 q = pose.apply(p);
    if (!(q.z() > 0.0)) continue;
    const Eigen::Vector2d uv = project(q, intrinsics);
    const long u = std::lround(uv.x());
    const long v = std::lround(uv.y());
    if (u < 0 || v < 0 || u >= intrinsics.width || v >= intrinsics.height) continue;
    double& d = depth(static_cast<int>(u), static_cast<int>(v));
    if (d == 0.0 || q.z() < d) d = q.z();
  }

  Mask mask(intrinsics.width, intrinsics.height, 0);
  bool any = false;
  for (std::size_t i = 0; i < depth.data.size(); ++i) {
    if (depth.data[i] > 0.0) {
      mask.data[i] = 1;
      any = true;
    }
  }
  if (!any) throw EmptyRenderError("generate_gt_maps: model projects to no pixel");

  std::vector<Point3> camera_keypoints;
  camera_keypoints.reserve(keypoints.size());
  for (const auto& k : keypoints.keypoints) camera_keypoints.push_back(pose.apply(k));
  out.maps = compute_maps(out.frame, mask, camera_keypoints, scheme);
  return out;
}

// ---------------------------------------------------------------- noise

void NoiseSpec::validate() const {
  for (double m : magnitude)
    if (!(m >= 0.0) || !std::isfinite(m)) throw ParameterError("noise: magnitudes must be finite and >= 0");
  if (!(mask_flip_rate >= 0.0 && mask_flip_rate < 1.0)) throw ParameterError("noise: mask_flip_rate must lie in [0, 1)");
}

bool NoiseSpec::is_zero() const {
  return mask_flip_rate == 0.0 && std::all_of(magnitude.begin(), magnitude.end(), [](double m) { return m == 0.0; });
}

double NoiseSpec::channel(int c) const {
  if (magnitude.empty()) return 0.0;
  const auto i = std::min(static_cast<std::size_t>(c), magnitude.size() - 1);
  return magnitude[i];
}

VoteMap apply_noise(const VoteMap& map, const NoiseSpec& spec) {
  spec.validate();
  VoteMap out = map;
  if (spec.is_zero()) return out;

  std::mt19937_64 rng(spec.rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const int depth = map.depth();
  constexpr double kMinRadius = 1e-6;

  for (int v = 0; v < map.height; ++v) {
    for (int u = 0; u < map.width; ++u) {
      if (map.masked(u, v)) {
        const std::size_t o = out.offset(u, v);
        for (int c = 0; c < depth; ++c) {
          const double draw = spec.kind == NoiseSpec::Kind::GaussianPerChannel ? gauss(rng) : unit(rng);
          out.values[o + c] += spec.channel(c) * draw;
        }
        switch (map.scheme) {
          case Scheme::Vector: {
            Vector3 d(out.values[o], out.values[o + 1], out.values[o + 2]);
            const double n = d.norm();
            if (n > 0.0) {
              d /= n;
            } else {
              d = Vector3(map.values[o], map.values[o + 1], map.values[o + 2]);
            }
            out.values[o] = d.x();
            out.values[o + 1] = d.y();
            out.values[o + 2] = d.z();
            break;
          }
          case Scheme::Polar: {
            const Vector3 d = polar_to_unit(out.values[o], out.values[o + 1]);
            const SchemeValue canon = compute_scheme_value(Scheme::Polar, d, Vector3::Zero());
            out.values[o] = canon[0];
            out.values[o + 1] = canon[1];
            break;
          }
          case Scheme::Radial:
            out.values[o] = std::max(out.values[o], kMinRadius);
            break;
          case Scheme::Offset:
            break;
        }
      }
      if (spec.mask_flip_rate > 0.0 && coin(rng) < spec.mask_flip_rate) out.mask(u, v) ^= 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------- losses

double loss_s(const Image<double>& predicted_mask, const Mask& gt_mask) {
  if (!predicted_mask.same_shape(gt_mask.width, gt_mask.height)) throw SizeError("loss_s: dimension mismatch");
  const std::size_t n = gt_mask.data.size();
  if (n == 0) throw SizeError("loss_s: empty image");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::abs(predicted_mask.data[i] - (gt_mask.data[i] ? 1.0 : 0.0));
  return sum / static_cast<double>(n);
}

double loss_m1(const VoteMap& predicted, const VoteMap& ground_truth) {
  if (predicted.scheme != ground_truth.scheme) throw ParameterError("loss_m1: scheme mismatch");
  if (predicted.width != ground_truth.width || predicted.height != ground_truth.height) {
    throw SizeError("loss_m1: dimension mismatch");
  }
  const int depth = ground_truth.depth();
  double sum = 0.0;
  std::size_t count = 0;
  for (int v = 0; v < ground_truth.height; ++v) {
    for (int u = 0; u < ground_truth.width; ++u) {
      if (!ground_truth.masked(u, v)) continue;
      ++count;
      const bool pred_on = predicted.masked(u, v);
      for (int c = 0; c < depth; ++c) {
        const double p = pred_on ? predicted.value(u, v, c) : 0.0;
        sum += std::abs(p - ground_truth.value(u, v, c));
      }
    }
  }
  if (count == 0) throw DegeneracyError("loss_m1: ground-truth mask is empty");
  return sum / static_cast<double>(count);
}

Mask occlude_half_plane(const Mask& mask, double fraction, double angle_rad) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ParameterError("occlusion fraction must lie in [0, 1]");
  struct Entry {
    double s;
    std::size_t index;
  };
  std::vector<Entry> on;
  const double cx = std::cos(angle_rad);
  const double sy = std::sin(angle_rad);
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u)
      if (mask(u, v)) on.push_back({u * cx + v * sy, mask.index(u, v)});

  const auto remove = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(on.size())));
  std::sort(on.begin(), on.end(), [](const Entry& a, const Entry& b) {
    return a.s != b.s ? a.s > b.s : a.index < b.index;
  });
  Mask out = mask;
  for (std::size_t i = 0; i < remove; ++i) out.data[on[i].index] = 0;
  return out;
}

}  // namespace radvote
