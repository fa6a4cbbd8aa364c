#pragma once
// Allocation-free voxel enumerators shared by the public visitors and the
// vote casting hot paths.

#include <algorithm>
#include <cmath>
#include <limits>

#include "radvote/accumulator.hpp"
#include "radvote/error.hpp"

namespace radvote::detail {

inline double near_distance(double c, int i) {
  const double lo = i;
  const double hi = i + 1;
  if (c < lo) return lo - c;
  if (c > hi) return c - hi;
  return 0.0;
}

inline double far_distance(double c, int i) {
  const double lo = i;
  const double hi = i + 1;
  return std::max(std::abs(c - lo), std::abs(c - hi));
}

inline int clamp_floor(double x, int lo, int hi) {
  if (!(x > lo)) return lo;
  if (!(x < hi)) return hi;
  return static_cast<int>(std::floor(x));
}

inline void check_sphere_args(const Vector3& c, double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw ParameterError("sphere vote: radius must be positive and finite");
  if (!c.allFinite()) throw ParameterError("sphere vote: centre must be finite");
}

// Supercover sphere: voxel kept iff dmin^2 <= r_out^2 and dmax^2 >= r_in^2,
// with squared distances summed in x, y, z order.
template <typename Visit>
std::size_t supercover_sphere(const GridGeometry& g, const Vector3& c, double r, double tol, Visit&& visit) {
  const double r_out = r + tol;
  const double r_in = std::max(0.0, r - tol);
  const double r_out2 = r_out * r_out;
  const double r_in2 = r_in * r_in;
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  std::size_t visited = 0;

  const int k0 = clamp_floor(c.z() - r_out - 1.0, 0, nz - 1);
  const int k1 = clamp_floor(c.z() + r_out + 1.0, 0, nz - 1);
  for (int k = k0; k <= k1; ++k) {
    const double dzn = near_distance(c.z(), k);
    const double dzf = far_distance(c.z(), k);
    const double dzn2 = dzn * dzn;
    const double dzf2 = dzf * dzf;
    if (dzn2 > r_out2) continue;
    const double sy = std::sqrt(r_out2 - dzn2);
    const int j0 = clamp_floor(c.y() - sy - 1.0, 0, ny - 1);
    const int j1 = clamp_floor(c.y() + sy + 1.0, 0, ny - 1);
    for (int j = j0; j <= j1; ++j) {
      const double dyn = near_distance(c.y(), j);
      const double dyf = far_distance(c.y(), j);
      const double dyn2 = dyn * dyn;
      const double dyf2 = dyf * dyf;
      const double row_near = dyn2 + dzn2;
      if (row_near > r_out2) continue;
      const double sx = std::sqrt(r_out2 - row_near);
      const int i0 = clamp_floor(c.x() - sx - 1.0, 0, nx - 1);
      const int i1 = clamp_floor(c.x() + sx + 1.0, 0, nx - 1);

      // Voxels strictly inside the inner radius form a hole in the row.
      int hole_lo = i1 + 1;
      int hole_hi = i1;
      const double row_far = dyf2 + dzf2;
      if (row_far < r_in2) {
        const double s2 = std::sqrt(r_in2 - row_far);
        hole_lo = static_cast<int>(std::floor(c.x() - s2)) + 2;
        hole_hi = static_cast<int>(std::ceil(c.x() + s2)) - 3;
      }
      const std::size_t row_base = g.linear_index(0, j, k);
      auto test = [&](int i) {
        const double dxn = near_distance(c.x(), i);
        const double dxf = far_distance(c.x(), i);
        const double dmin2 = dxn * dxn + dyn2 + dzn2;
        const double dmax2 = dxf * dxf + dyf2 + dzf2;
        if (dmin2 <= r_out2 && dmax2 >= r_in2) {
          visit(row_base + static_cast<std::size_t>(i));
          ++visited;
        }
      };
      if (hole_lo > hole_hi) {
        for (int i = i0; i <= i1; ++i) test(i);
      } else {
        for (int i = i0; i <= std::min(i1, hole_lo - 1); ++i) test(i);
        for (int i = std::max(i0, hole_hi + 1); i <= i1; ++i) test(i);
      }
    }
  }
  return visited;
}

// Per-slice arithmetic circles. The slice circle is cut at the slice-centre
// plane; voxels are tested at their centres.
template <typename Visit>
std::size_t andres_sphere(const GridGeometry& g, const Vector3& c, double r, double half_width, Visit&& visit) {
  const double rq = std::round(2.0 * r) / 2.0;
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  std::size_t visited = 0;

  const int k0 = clamp_floor(c.z() - rq - 1.5, 0, nz - 1);
  const int k1 = clamp_floor(c.z() + rq + 0.5, 0, nz - 1);
  for (int k = k0; k <= k1; ++k) {
    const double dz = (k + 0.5) - c.z();
    if (std::abs(dz) > rq) continue;
    const double rs = std::sqrt(rq * rq - dz * dz);
    const double inner = std::max(0.0, rs - half_width);
    const double outer = rs + half_width;
    const double in2 = inner * inner;
    const double out2 = outer * outer;
    const int j0 = clamp_floor(c.y() - outer - 1.5, 0, ny - 1);
    const int j1 = clamp_floor(c.y() + outer + 0.5, 0, ny - 1);
    for (int j = j0; j <= j1; ++j) {
      const double dy = (j + 0.5) - c.y();
      const double dy2 = dy * dy;
      if (dy2 >= out2) continue;
      const double sx = std::sqrt(out2 - dy2);
      const int i0 = clamp_floor(c.x() - sx - 1.5, 0, nx - 1);
      const int i1 = clamp_floor(c.x() + sx + 0.5, 0, nx - 1);
      int hole_lo = i1 + 1;
      int hole_hi = i1;
      if (dy2 < in2) {
        const double s2 = std::sqrt(in2 - dy2);
        hole_lo = static_cast<int>(std::floor(c.x() - 0.5 - s2)) + 2;
        hole_hi = static_cast<int>(std::ceil(c.x() - 0.5 + s2)) - 2;
      }
      const std::size_t row_base = g.linear_index(0, j, k);
      auto test = [&](int i) {
        const double dx = (i + 0.5) - c.x();
        const double d2 = dx * dx + dy2;
        if (in2 <= d2 && d2 < out2) {
          visit(row_base + static_cast<std::size_t>(i));
          ++visited;
        }
      };
      if (hole_lo > hole_hi) {
        for (int i = i0; i <= i1; ++i) test(i);
      } else {
        for (int i = i0; i <= std::min(i1, hole_lo - 1); ++i) test(i);
        for (int i = std::max(i0, hole_hi + 1); i <= i1; ++i) test(i);
      }
    }
  }
  return visited;
}

// Voxels whose centre lies in the spherical shell (r - w)^2 <= d^2 < (r + w)^2,
// enumerated slice by slice; d^2 is summed in x, y, z order.
template <typename Visit>
std::size_t shell_sphere(const GridGeometry& g, const Vector3& c, double r, double half_width, Visit&& visit) {
  const double lo = std::max(0.0, r - half_width);
  const double hi = r + half_width;
  const double lo2 = lo * lo;
  const double hi2 = hi * hi;
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  std::size_t visited = 0;

  const int k0 = clamp_floor(c.z() - hi - 1.5, 0, nz - 1);
  const int k1 = clamp_floor(c.z() + hi + 0.5, 0, nz - 1);
  for (int k = k0; k <= k1; ++k) {
    const double dz = (k + 0.5) - c.z();
    const double dz2 = dz * dz;
    if (dz2 >= hi2) continue;
    const double sy = std::sqrt(hi2 - dz2);
    const int j0 = clamp_floor(c.y() - sy - 1.5, 0, ny - 1);
    const int j1 = clamp_floor(c.y() + sy + 0.5, 0, ny - 1);
    for (int j = j0; j <= j1; ++j) {
      const double dy = (j + 0.5) - c.y();
      const double dy2 = dy * dy;
      const double row = dy2 + dz2;
      if (row >= hi2) continue;
      const double sx = std::sqrt(hi2 - row);
      const int i0 = clamp_floor(c.x() - sx - 1.5, 0, nx - 1);
      const int i1 = clamp_floor(c.x() + sx + 0.5, 0, nx - 1);
      int hole_lo = i1 + 1;
      int hole_hi = i1;
      if (row < lo2) {
        const double s2 = std::sqrt(lo2 - row);
        hole_lo = static_cast<int>(std::floor(c.x() - 0.5 - s2)) + 2;
        hole_hi = static_cast<int>(std::ceil(c.x() - 0.5 + s2)) - 2;
      }
      const std::size_t row_base = g.linear_index(0, j, k);
      auto test = [&](int i) {
        const double dx = (i + 0.5) - c.x();
        const double d2 = dx * dx + dy2 + dz2;
        if (lo2 <= d2 && d2 < hi2) {
          visit(row_base + static_cast<std::size_t>(i));
          ++visited;
        }
      };
      if (hole_lo > hole_hi) {
        for (int i = i0; i <= i1; ++i) test(i);
      } else {
        for (int i = i0; i <= std::min(i1, hole_lo - 1); ++i) test(i);
        for (int i = std::max(i0, hole_hi + 1); i <= i1; ++i) test(i);
      }
    }
  }
  return visited;
}

template <typename Visit>
std::size_t sphere_voxels(const GridGeometry& g, const Point3& center, double radius, const SphereOptions& opt,
                          Visit&& visit) {
  check_sphere_args(center, radius);
  const Vector3 c = g.to_grid(center);
  const double r = radius / g.resolution;
  switch (opt.rule) {
    case SphereRule::Shell:
      return shell_sphere(g, c, r, opt.half_width, visit);
    case SphereRule::AndresSlices:
      return andres_sphere(g, c, r, opt.half_width, visit);
    case SphereRule::Supercover:
      return supercover_sphere(g, c, r, opt.surface_tolerance, visit);
  }
  return 0;
}

// Amanatides-Woo traversal in voxel units.
template <typename Visit>
std::size_t ray_voxels(const GridGeometry& g, const Point3& origin, const Vector3& direction, Visit&& visit) {
  const double len = direction.norm();
  if (!(len > 0.0) || !std::isfinite(len)) throw DegeneracyError("ray vote: zero or non-finite direction");
  if (!origin.allFinite()) throw ParameterError("ray vote: origin must be finite");
  const Vector3 d = direction / len;
  const Vector3 p = g.to_grid(origin);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Clip the half-line against the lattice box [0, n].
  double t_enter = 0.0;
  double t_exit = kInf;
  for (int a = 0; a < 3; ++a) {
    const double n = g.dims[static_cast<std::size_t>(a)];
    if (d(a) == 0.0) {
      if (p(a) < 0.0 || p(a) > n) return 0;
      continue;
    }
    double t0 = (0.0 - p(a)) / d(a);
    double t1 = (n - p(a)) / d(a);
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (!(t_enter < t_exit)) return 0;

  std::array<int, 3> v{};
  std::array<int, 3> step{};
  std::array<double, 3> t_max{};
  std::array<double, 3> t_delta{};
  for (int a = 0; a < 3; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    const double s = p(a) + t_enter * d(a);
    v[ua] = std::clamp(static_cast<int>(std::floor(s)), 0, g.dims[ua] - 1);
    if (d(a) > 0.0) {
      step[ua] = 1;
      t_max[ua] = ((v[ua] + 1) - p(a)) / d(a);
      t_delta[ua] = 1.0 / d(a);
    } else if (d(a) < 0.0) {
      step[ua] = -1;
      t_max[ua] = (v[ua] - p(a)) / d(a);
      t_delta[ua] = -1.0 / d(a);
    } else {
      step[ua] = 0;
      t_max[ua] = kInf;
      t_delta[ua] = kInf;
    }
  }

  std::size_t visited = 0;
  while (true) {
    visit(g.linear_index(v[0], v[1], v[2]));
    ++visited;
    std::size_t a = 0;
    if (t_max[1] < t_max[a]) a = 1;
    if (t_max[2] < t_max[a]) a = 2;
    if (t_max[a] >= t_exit) break;
    v[a] += step[a];
    if (v[a] < 0 || v[a] >= g.dims[a]) break;
    t_max[a] += t_delta[a];
  }
  return visited;
}

}  // namespace radvote::detail
