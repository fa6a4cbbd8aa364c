#include "radvote/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "radvote/accumulator.hpp"
#include "radvote/geometry.hpp"
#include "radvote/pipeline.hpp"
#include "radvote/synthetic.hpp"

namespace radvote {

namespace {

struct Instance {
  GridGeometry grid;
  Point3 centre;
  double radius = 0.0;
  Vector3 direction;
};

Instance random_instance(std::mt19937_64& rng, double resolution) {
  std::uniform_int_distribution<int> dim(6, 40);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Instance in;
  in.grid.resolution = resolution;
  in.grid.dims = {dim(rng), dim(rng), dim(rng)};
  in.grid.origin = Point3(u01(rng) - 0.5, u01(rng) - 0.5, u01(rng) - 0.5) * 100.0;
  const Point3 extent(in.grid.dims[0] * resolution, in.grid.dims[1] * resolution, in.grid.dims[2] * resolution);
  // Centres may sit outside the lattice so clipped shells are covered too.
  for (int a = 0; a < 3; ++a) in.centre(a) = in.grid.origin(a) + (1.4 * u01(rng) - 0.2) * extent(a);
  in.radius = resolution * (0.3 + 25.0 * u01(rng));
  in.direction = random_unit_vector(rng);
  return in;
}

// Definitional predicates evaluated on every voxel of the lattice.
std::set<std::size_t> brute_sphere(const Instance& in, SphereRule rule) {
  const GridGeometry& g = in.grid;
  const Vector3 c = g.to_grid(in.centre);
  const double r = in.radius / g.resolution;
  const double rq = std::round(2.0 * r) / 2.0;
  std::set<std::size_t> out;
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const double dx = (i + 0.5) - c.x();
        const double dy = (j + 0.5) - c.y();
        const double dz = (k + 0.5) - c.z();
        bool hit = false;
        if (rule == SphereRule::Shell) {
          const double lo = std::max(0.0, r - 0.5);
          const double hi = r + 0.5;
          const double d2 = dx * dx + dy * dy + dz * dz;
          hit = lo * lo <= d2 && d2 < hi * hi;
        } else if (rule == SphereRule::AndresSlices) {
          if (std::abs(dz) <= rq) {
            const double rs = std::sqrt(rq * rq - dz * dz);
            const double inner = std::max(0.0, rs - 0.5);
            const double outer = rs + 0.5;
            const double d2 = dx * dx + dy * dy;
            hit = inner * inner <= d2 && d2 < outer * outer;
          }
        } else {
          auto nearest = [](double cc, int v) { return std::max({0.0, v - cc, cc - (v + 1.0)}); };
          auto farthest = [](double cc, int v) { return std::max(std::abs(cc - v), std::abs(cc - (v + 1.0))); };
          const double nx = nearest(c.x(), i), ny = nearest(c.y(), j), nz = nearest(c.z(), k);
          const double fx = farthest(c.x(), i), fy = farthest(c.y(), j), fz = farthest(c.z(), k);
          hit = nx * nx + ny * ny + nz * nz <= r * r && fx * fx + fy * fy + fz * fz >= r * r;
        }
        if (hit) out.insert(g.linear_index(i, j, k));
      }
  return out;
}

// Voxels whose box meets the half-line in a segment of positive length.
std::set<std::size_t> brute_ray(const Instance& in) {
  const GridGeometry& g = in.grid;
  const Vector3 p = g.to_grid(in.centre);
  const Vector3 d = in.direction.normalized();
  std::set<std::size_t> out;
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const int idx[3] = {i, j, k};
        double t0 = 0.0;
        double t1 = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3 && t0 < t1; ++a) {
          if (d(a) == 0.0) {
            if (p(a) < idx[a] || p(a) > idx[a] + 1) t1 = -1.0;
            continue;
          }
          double ta = (idx[a] - p(a)) / d(a);
          double tb = (idx[a] + 1 - p(a)) / d(a);
          if (ta > tb) std::swap(ta, tb);
          t0 = std::max(t0, ta);
          t1 = std::min(t1, tb);
        }
        if (t0 < t1) out.insert(g.linear_index(i, j, k));
      }
  return out;
}

SuiteResult sphere_suite(SphereRule rule, const char* name, const SelftestOptions& opt) {
  std::mt19937_64 rng(opt.seed ^ 0x5348454cull);
  SphereOptions so;
  so.rule = rule;
  so.half_width = opt.annulus_half_width;
  int mismatches = 0;
  int total = 0;
  for (double rho : {1.0, 5.0})
    for (int n = 0; n < opt.instances; ++n, ++total) {
      const Instance in = random_instance(rng, rho);
      std::set<std::size_t> got;
      for_each_sphere_voxel(in.grid, in.centre, in.radius, so, [&](std::size_t v) { got.insert(v); });
      if (got != brute_sphere(in, rule)) ++mismatches;
    }
  std::ostringstream s;
  s << mismatches << " of " << total << " instances differ from the exhaustive oracle";
  return {name, mismatches == 0, s.str()};
}

SuiteResult ray_suite(const SelftestOptions& opt) {
  std::mt19937_64 rng(opt.seed ^ 0x524159ull);
  int mismatches = 0;
  int total = 0;
  for (double rho : {1.0, 5.0})
    for (int n = 0; n < opt.instances; ++n, ++total) {
      const Instance in = random_instance(rng, rho);
      std::set<std::size_t> got;
      for_each_ray_voxel(in.grid, in.centre, in.direction, [&](std::size_t v) { got.insert(v); });
      if (got != brute_ray(in)) ++mismatches;
    }
  std::ostringstream s;
  s << mismatches << " of " << total << " instances differ from the slab oracle";
  return {"ray_rasterizer", mismatches == 0, s.str()};
}

SuiteResult horn_suite(const SelftestOptions& opt) {
  std::mt19937_64 rng(opt.seed ^ 0x484f524eull);
  std::uniform_real_distribution<double> u(-200.0, 200.0);
  double worst = 0.0;
  const int n = 200;
  for (int t = 0; t < n; ++t) {
    RigidTransform truth = random_rotation(rng);
    truth.translation = Vector3(u(rng), u(rng), u(rng) + 800.0);
    std::vector<Point3> src, dst;
    for (int i = 0; i < 4; ++i) {
      src.emplace_back(u(rng), u(rng), u(rng));
      dst.push_back(truth.apply(src.back()));
    }
    const RigidTransform est = horn_solve(src, dst);
    for (std::size_t i = 0; i < src.size(); ++i) worst = std::max(worst, (est.apply(src[i]) - dst[i]).norm());
  }
  std::ostringstream s;
  s << "worst residual " << worst << " mm over " << n << " transforms";
  return {"horn_round_trip", worst < 1e-9, s.str()};
}

SuiteResult metric_suite(const SelftestOptions& opt) {
  std::mt19937_64 rng(opt.seed ^ 0x4d4554ull);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  std::uniform_real_distribution<double> dist(0.0, 150.0);
  double add_err = 0.0, adds_err = 0.0, auc_err = 0.0;
  for (std::size_t npts : {std::size_t{300}, kAddsTreeThreshold + 700}) {
    PointCloud model;
    for (std::size_t i = 0; i < npts; ++i) model.points.emplace_back(u(rng), u(rng), u(rng));
    RigidTransform gt = random_rotation(rng);
    RigidTransform est = random_rotation(rng);
    est.translation = Vector3(u(rng), u(rng), u(rng)) * 0.1;
    double add = 0.0, adds = 0.0;
    for (const auto& p : model.points) {
      const Point3 a = gt.apply(p);
      add += (a - est.apply(p)).norm();
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : model.points) best = std::min(best, (a - est.apply(q)).norm());
      adds += best;
    }
    add /= static_cast<double>(npts);
    adds /= static_cast<double>(npts);
    add_err = std::max(add_err, std::abs(add - add_metric(model, gt, est)));
    adds_err = std::max(adds_err, std::abs(adds - adds_metric(model, gt, est)));
  }
  for (int t = 0; t < 20; ++t) {
    std::vector<double> d(50);
    for (auto& v : d) v = dist(rng);
    const int samples = 10000;
    double acc = 0.0;
    for (int s = 0; s < samples; ++s) {
      const double thr = 100.0 * (s + 0.5) / samples;
      acc += static_cast<double>(std::count_if(d.begin(), d.end(), [thr](double x) { return x < thr; })) /
             static_cast<double>(d.size());
    }
    auc_err = std::max(auc_err, std::abs(acc / samples - auc_metric(d, 100.0)));
  }
  std::ostringstream s;
  s << "ADD " << add_err << ", ADD-S " << adds_err << ", AUC " << auc_err;
  return {"metric_oracles", add_err < 1e-9 && adds_err < 1e-9 && auc_err < 1e-3, s.str()};
}

SuiteResult guarded(const char* name, const std::function<SuiteResult()>& run) {
  try {
    return run();
  } catch (const std::exception& e) {
    return {name, false, std::string("threw: ") + e.what()};
  }
}

}  // namespace

std::vector<SuiteResult> run_selftest(const SelftestOptions& options) {
  std::vector<SuiteResult> out;
  out.push_back(guarded("sphere_shell", [&] { return sphere_suite(SphereRule::Shell, "sphere_shell", options); }));
  out.push_back(guarded("sphere_andres_slices",
                        [&] { return sphere_suite(SphereRule::AndresSlices, "sphere_andres_slices", options); }));
  out.push_back(
      guarded("sphere_supercover", [&] { return sphere_suite(SphereRule::Supercover, "sphere_supercover", options); }));
  out.push_back(guarded("ray_rasterizer", [&] { return ray_suite(options); }));
  out.push_back(guarded("horn_round_trip", [&] { return horn_suite(options); }));
  out.push_back(guarded("metric_oracles", [&] { return metric_suite(options); }));
  return out;
}

}  // namespace radvote
