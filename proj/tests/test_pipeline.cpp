#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "radvote/error.hpp"
#include "radvote/pipeline.hpp"
#include "radvote/synthetic.hpp"

using namespace radvote;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double span) {
  std::uniform_real_distribution<double> u(-span, span);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.emplace_back(u(rng), u(rng), u(rng));
  return c;
}

struct Frame {
  PointCloud model;
  RigidTransform pose;
  KeypointSet keypoints;
  GroundTruthRender render;
};

Frame make_frame(std::uint64_t seed, Scheme scheme, std::size_t k) {
  std::mt19937_64 rng(seed);
  Frame f;
  f.model = sample_box_shell(Vector3(70, 50, 40), 2.0);
  f.pose = random_object_pose(f.model, CameraIntrinsics::linemod(), rng);
  f.keypoints = fps_keypoints(f.model, k);
  f.render = generate_gt_maps(f.model, f.pose, f.keypoints, CameraIntrinsics::linemod(), scheme);
  return f;
}

}  // namespace

TEST_CASE("ADD and ADD-S match brute force") {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 30; ++t) {
    const PointCloud model = random_cloud(rng, 300, 50.0);
    const RigidTransform a = oracle::random_transform(rng), b = oracle::random_transform(rng);
    CHECK(std::abs(add_metric(model, a, b) - oracle::add(model.points, a, b)) < 1e-9);
    CHECK(std::abs(adds_metric(model, a, b) - oracle::adds(model.points, a, b)) < 1e-9);
    CHECK(adds_metric(model, a, b) <= add_metric(model, a, b) + 1e-12);
    CHECK(add_metric(model, a, a) == 0.0);
  }
  // above the k-d tree threshold
  const PointCloud big = random_cloud(rng, 5700, 50.0);
  const RigidTransform a = oracle::random_transform(rng, 20.0), b = oracle::random_transform(rng, 20.0);
  CHECK(std::abs(adds_metric(big, a, b) - oracle::adds(big.points, a, b)) < 1e-9);
  CHECK_THROWS_AS(add_metric(PointCloud{}, a, b), SizeError);
  CHECK_THROWS_AS(adds_metric(PointCloud{}, a, b), SizeError);
}

TEST_CASE("ADD examples") {
  PointCloud m;
  m.points = {Point3(1, 0, 0), Point3(-1, 0, 0)};
  const RigidTransform shift = RigidTransform::from_axis_angle(Vector3::UnitZ(), 0.0, Vector3(0, 3, 4));
  CHECK(add_metric(m, RigidTransform::identity(), shift) == 5.0);
  // a half turn swaps the two points: ADD sees 2, ADD-S sees 0
  const RigidTransform flip = RigidTransform::from_axis_angle(Vector3::UnitZ(), std::numbers::pi);
  CHECK(std::abs(add_metric(m, RigidTransform::identity(), flip) - 2.0) < 1e-12);
  CHECK(adds_metric(m, RigidTransform::identity(), flip) < 1e-12);
}

TEST_CASE("ADD-S ignores rotations about a cylinder axis") {
  PointCloud cyl;
  for (int i = 0; i < 72; ++i)
    for (int h = 0; h < 10; ++h) {
      const double a = 2.0 * std::numbers::pi * i / 72.0;
      cyl.points.emplace_back(30.0 * std::cos(a), 30.0 * std::sin(a), 5.0 * h);
    }
  const RigidTransform spin = RigidTransform::from_axis_angle(Vector3::UnitZ(), 2.0 * std::numbers::pi * 7.0 / 72.0);
  CHECK(adds_metric(cyl, RigidTransform::identity(), spin) < 1e-9);
  CHECK(add_metric(cyl, RigidTransform::identity(), spin) > 10.0);
}

TEST_CASE("accuracy threshold is strict") {
  const std::vector<double> d{0.0, 9.999, 10.0, 10.001};
  CHECK(accuracy_at_threshold(d, 100.0, 0.10) == 0.5);
  CHECK(accuracy_at_threshold(d, 100.0, 0.2) == 1.0);
  CHECK_THROWS_AS(accuracy_at_threshold({}, 1.0), SizeError);
  CHECK_THROWS_AS(accuracy_at_threshold(d, 1.0, 0.0), ParameterError);
}

TEST_CASE("AUC examples and sampled oracle") {
  CHECK(auc_metric(std::vector<double>{0.0}, 100.0) == 1.0);
  CHECK(auc_metric(std::vector<double>{100.0}, 100.0) == 0.0);
  CHECK(auc_metric(std::vector<double>{250.0}, 100.0) == 0.0);
  CHECK(auc_metric(std::vector<double>{25.0, 75.0}, 100.0) == 0.5);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 130.0);
  for (int t = 0; t < 10; ++t) {
    std::vector<double> d(200);
    for (auto& x : d) x = u(rng);
    CHECK(std::abs(auc_metric(d, 100.0) - oracle::auc_sampled(d, 100.0)) < 1e-3);
  }
  CHECK_THROWS_AS(auc_metric({}, 1.0), SizeError);
  CHECK_THROWS_AS(auc_metric(std::vector<double>{1.0}, 0.0), ParameterError);
}

TEST_CASE("mean and population standard deviation") {
  const MeanStd m = mean_std(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9});
  CHECK(m.mean == 5.0);
  CHECK(m.stddev == 2.0);
  CHECK(mean_std({}).mean == 0.0);
}

TEST_CASE("recover_pose inverts a rigid motion of the keypoints") {
  std::mt19937_64 rng(43);
  for (int t = 0; t < 100; ++t) {
    KeypointSet k;
    k.keypoints = random_cloud(rng, 3 + t % 6, 80.0).points;
    const RigidTransform pose = oracle::random_transform(rng);
    std::vector<Point3> est;
    for (const auto& p : k.keypoints) est.push_back(pose.apply(p));
    const RigidTransform r = recover_pose(k, est);
    CHECK((r.rotation - pose.rotation).norm() < 1e-9);
    CHECK((r.translation - pose.translation).norm() < 1e-7);
  }
}

TEST_CASE("window geometry is aligned with and clipped to the full lattice") {
  GridGeometry full;
  full.origin = Point3(-10, -10, -10);
  full.resolution = 2.0;
  full.dims = {20, 20, 20};
  const GridGeometry w = window_geometry(full, Point3(0.3, 0.3, 0.3), 5.0);
  CHECK(w.resolution == 2.0);
  for (int a = 0; a < 3; ++a) {
    const double steps = (w.origin(a) - full.origin(a)) / full.resolution;
    CHECK(steps == std::round(steps));
    CHECK(w.origin(a) <= 0.3 - 5.0);
    CHECK(w.origin(a) + w.dims[static_cast<std::size_t>(a)] * 2.0 >= 0.3 + 5.0);
  }
  const GridGeometry edge = window_geometry(full, Point3(29, 29, 29), 5.0);
  CHECK(edge.max_corner().isApprox(full.max_corner()));
  CHECK(edge.dims[0] >= 1);
}

TEST_CASE("noiseless localization lands within one voxel for every scheme") {
  for (Scheme scheme : kAllSchemes) {
    const Frame f = make_frame(44, scheme, 4);
    LocalizationOptions o;
    o.resolution = 2.0;
    o.coarse_resolution = 8.0;
    o.window_factor = 3.0;
    o.search_margin = 2.0 * object_radius(f.model);
    o.cast.max_votes = 1500;
    const auto votes = estimate_keypoints(f.render.frame, f.render.maps, o);
    REQUIRE(votes.size() == 4);
    std::vector<Point3> est;
    for (std::size_t j = 0; j < votes.size(); ++j) {
      const Point3 truth = f.pose.apply(f.keypoints.keypoints[j]);
      INFO(to_string(scheme), " kp ", j);
      CHECK((votes[j].location - truth).norm() <= std::sqrt(3.0) * o.resolution);
      CHECK(votes[j].memory_bytes > votes[j].geometry.memory_bytes());  // coarse pass counted
      const std::size_t per_pass = std::min<std::size_t>(f.render.maps[j].mask_count(), o.cast.max_votes);
      CHECK(votes[j].stats.votes % per_pass == 0);  // one coarse pass plus one pass per candidate window
      CHECK(votes[j].stats.votes >= 2 * per_pass);
      est.push_back(votes[j].location);
    }
    const RigidTransform pose = recover_pose(f.keypoints, est);
    CHECK(add_metric(f.model, f.pose, pose) < 0.1 * object_radius(f.model));
  }
}

TEST_CASE("widened coarse shells give the keypoint voxel the maximum count") {
  for (std::uint64_t seed = 60; seed < 70; ++seed) {
    const Frame f = make_frame(seed, Scheme::Radial, 4);
    for (std::size_t j = 0; j < 4; ++j) {
      AccumulatorGrid g(search_geometry(f.render.frame, 150.0, 8.0));
      CastOptions c;
      c.sphere.half_width = kCoarseShellHalfWidth;
      const VoteStats st = cast_votes(g, f.render.maps[j], f.render.frame, c);
      const auto v = g.geometry().voxel_of(f.pose.apply(f.keypoints.keypoints[j]));
      REQUIRE(v.has_value());
      CHECK(g.at((*v)[0], (*v)[1], (*v)[2]) == st.votes);
      CHECK(g.max_count() == st.votes);
    }
  }
}

TEST_CASE("single-pass cube option") {
  const Frame f = make_frame(45, Scheme::Offset, 3);
  LocalizationOptions o;
  o.resolution = 4.0;
  o.fixed_extent = 479.0;
  const KeypointVote v = localize_keypoint(f.render.frame, f.render.maps[0], o);
  CHECK(v.geometry.dims == std::array<int, 3>{120, 120, 120});
  CHECK(v.memory_bytes == 4ull * 120 * 120 * 120);
  CHECK((v.location - f.pose.apply(f.keypoints.keypoints[0])).norm() <= std::sqrt(3.0) * 4.0);
}

TEST_CASE("ensemble accumulator equals the sum of per-scheme accumulators") {
  const Frame r = make_frame(46, Scheme::Radial, 3);
  const Frame v = make_frame(46, Scheme::Vector, 3);
  const Frame o = make_frame(46, Scheme::Offset, 3);
  const GridGeometry g = search_geometry(r.render.frame, 150.0, 4.0);
  std::vector<AccumulatorGrid> parts;
  AccumulatorGrid together(g);
  for (const VoteMap* m : {&r.render.maps[1], &v.render.maps[1], &o.render.maps[1]}) {
    parts.emplace_back(g);
    cast_votes(parts.back(), *m, r.render.frame);
    cast_votes(together, *m, r.render.frame);
  }
  CHECK(merge_grids(parts) == together);
}

TEST_CASE("estimate_keypoints needs three maps") {
  const Frame f = make_frame(47, Scheme::Offset, 3);
  LocalizationOptions o;
  o.search_margin = 100.0;
  CHECK_THROWS_AS(estimate_keypoints(f.render.frame, std::span<const VoteMap>(f.render.maps.data(), 2), o), SizeError);
  CHECK_THROWS_AS(localize_keypoint(f.render.frame, std::span<const VoteMap>{}, o), SizeError);
  DepthFrame empty{CameraIntrinsics::linemod(), Image<double>(640, 480, 0.0)};
  CHECK_THROWS_AS(search_geometry(empty, 1.0, 1.0), InvalidDepthError);
}

TEST_CASE("the first three of eight keypoints localize exactly as a three-keypoint set") {
  const Frame eight = make_frame(48, Scheme::Radial, 8);
  const Frame three = make_frame(48, Scheme::Radial, 3);
  LocalizationOptions o;
  o.resolution = 2.0;
  o.search_margin = 150.0;
  o.cast.max_votes = 800;
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(eight.keypoints.keypoints[j] == three.keypoints.keypoints[j]);
    CHECK(localize_keypoint(eight.render.frame, eight.render.maps[j], o).location ==
          localize_keypoint(three.render.frame, three.render.maps[j], o).location);
  }
}

TEST_CASE("metrics are invariant to a common rigid motion") {
  std::mt19937_64 rng(49);
  const PointCloud model = random_cloud(rng, 400, 40.0);
  for (int t = 0; t < 20; ++t) {
    const RigidTransform gt = oracle::random_transform(rng), est = oracle::random_transform(rng, 5.0) * gt;
    const RigidTransform m = oracle::random_transform(rng);
    CHECK(std::abs(add_metric(model, m * gt, m * est) - add_metric(model, gt, est)) < 1e-9);
    CHECK(std::abs(adds_metric(model, m * gt, m * est) - adds_metric(model, gt, est)) < 1e-9);
  }
}
