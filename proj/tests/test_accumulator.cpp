#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "radvote/accumulator.hpp"
#include "radvote/error.hpp"
#include "radvote/pipeline.hpp"
#include "radvote/synthetic.hpp"

using namespace radvote;

namespace {

struct Visited {
  std::vector<std::size_t> order;
  std::set<std::size_t> set() const { return {order.begin(), order.end()}; }
};

Visited sphere_voxels(const GridGeometry& g, const Point3& c, double r, SphereRule rule) {
  Visited v;
  SphereOptions o;
  o.rule = rule;
  const std::size_t n = for_each_sphere_voxel(g, c, r, o, [&](std::size_t i) { v.order.push_back(i); });
  CHECK(n == v.order.size());
  return v;
}

double random_radius(std::mt19937_64& rng, double resolution) {
  return resolution * std::uniform_real_distribution<double>(0.3, 25.0)(rng);
}

GroundTruthRender render(std::uint64_t seed, Scheme scheme) {
  std::mt19937_64 rng(seed);
  const PointCloud model = sample_box_shell(Vector3(80, 50, 40), 2.0);
  const RigidTransform pose = random_object_pose(model, CameraIntrinsics::linemod(), rng);
  const KeypointSet kps = bbox_keypoints(model, 2.0);
  return generate_gt_maps(model, pose, kps.subset(std::vector<std::size_t>{0, 7}), CameraIntrinsics::linemod(), scheme);
}

}  // namespace

TEST_CASE("sphere rasterizers equal their brute-force definitions") {
  struct Rule {
    SphereRule rule;
    std::set<std::size_t> (*oracle)(const GridGeometry&, const Point3&, double);
  };
  const Rule rules[] = {{SphereRule::Shell, oracle::shell_sphere},
                        {SphereRule::AndresSlices, oracle::andres_sphere},
                        {SphereRule::Supercover, oracle::supercover_sphere}};
  std::mt19937_64 rng(21);
  for (const auto& rule : rules)
    for (double rho : {1.0, 5.0})
      for (int t = 0; t < 60; ++t) {
        const GridGeometry g = oracle::random_grid(rng, rho, 40);
        const Point3 c = oracle::random_point_near(rng, g);
        const double r = random_radius(rng, rho);
        const Visited v = sphere_voxels(g, c, r, rule.rule);
        const auto s = v.set();
        CHECK(s.size() == v.order.size());  // no voxel reported twice
        CHECK(s == rule.oracle(g, c, r));
      }
}

TEST_CASE("ray walker equals the slab-test definition") {
  std::mt19937_64 rng(22);
  for (double rho : {1.0, 5.0})
    for (int t = 0; t < 150; ++t) {
      const GridGeometry g = oracle::random_grid(rng, rho, 40);
      const Point3 o = oracle::random_point_near(rng, g);
      const Vector3 d = oracle::random_direction(rng);
      Visited v;
      for_each_ray_voxel(g, o, d, [&](std::size_t i) { v.order.push_back(i); });
      CHECK(v.set().size() == v.order.size());
      CHECK(v.set() == oracle::ray(g, o, d));
      // 6-connected walk: consecutive voxels share a face
      for (std::size_t i = 1; i < v.order.size(); ++i) {
        const auto a = g.voxel_coords(v.order[i - 1]), b = g.voxel_coords(v.order[i]);
        CHECK(std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]) == 1);
      }
    }
}

TEST_CASE("ray walker: axis-aligned rays and degenerate input") {
  GridGeometry g;
  g.dims = {10, 10, 10};
  Visited v;
  for_each_ray_voxel(g, Point3(0.5, 0.5, 0.5), Vector3(1, 0, 0), [&](std::size_t i) { v.order.push_back(i); });
  CHECK(v.order.size() == 10);
  CHECK(v.order.front() == g.linear_index(0, 0, 0));
  CHECK(v.order.back() == g.linear_index(9, 0, 0));
  CHECK(for_each_ray_voxel(g, Point3(0.5, 0.5, 0.5), Vector3(-1, 0, 0), [](std::size_t) {}) == 1);
  CHECK(for_each_ray_voxel(g, Point3(-5, 0.5, 0.5), Vector3(-1, 0, 0), [](std::size_t) {}) == 0);
  CHECK_THROWS_AS(for_each_ray_voxel(g, Point3(1, 1, 1), Vector3::Zero(), [](std::size_t) {}), DegeneracyError);
}

TEST_CASE("supercover contains every sampled surface point") {
  std::mt19937_64 rng(23);
  for (double rho : {1.0, 5.0})
    for (int t = 0; t < 40; ++t) {
      const GridGeometry g = oracle::random_grid(rng, rho, 40);
      const Point3 c = oracle::random_point_near(rng, g);
      const double r = random_radius(rng, rho);
      const auto s = sphere_voxels(g, c, r, SphereRule::Supercover).set();
      for (int k = 0; k < 2000; ++k) {
        const Point3 p = c + r * oracle::random_direction(rng);
        const auto v = g.voxel_of(p);
        if (v) CHECK(s.count(g.linear_index((*v)[0], (*v)[1], (*v)[2])) == 1);
      }
    }
}

TEST_CASE("shell voxels lie within half a voxel of the sphere and cover it") {
  std::mt19937_64 rng(24);
  for (double rho : {1.0, 5.0})
    for (int t = 0; t < 40; ++t) {
      GridGeometry g = oracle::random_grid(rng, rho, 40);
      const Point3 c = g.origin + 0.5 * rho * Vector3(g.dims[0], g.dims[1], g.dims[2]);
      const double r = rho * std::uniform_real_distribution<double>(1.0, 15.0)(rng);
      g.dims = {40, 40, 40};
      g.origin = c - Vector3::Constant(20.0 * rho);
      const auto s = sphere_voxels(g, c, r, SphereRule::Shell).set();
      std::vector<Point3> centres;
      for (std::size_t i : s) {
        const auto v = g.voxel_coords(i);
        const Point3 q = g.voxel_center(v[0], v[1], v[2]);
        CHECK(std::abs((q - c).norm() - r) <= 0.5 * rho + 1e-9);
        centres.push_back(q);
      }
      // no surface point is farther than one voxel edge from a shell voxel centre
      const KdTree tree(centres);
      for (int k = 0; k < 500; ++k) {
        const Point3 p = c + r * oracle::random_direction(rng);
        CHECK(std::sqrt(tree.nearest(p).squared_distance) <= rho);
      }
    }
}

TEST_CASE("annulus half-width hook changes the shell") {
  GridGeometry g;
  g.dims = {30, 30, 30};
  SphereOptions narrow;
  narrow.half_width = 0.45;
  std::size_t a = 0, b = 0;
  for_each_sphere_voxel(g, Point3(15.2, 14.9, 15.1), 9.3, {}, [&](std::size_t) { ++a; });
  for_each_sphere_voxel(g, Point3(15.2, 14.9, 15.1), 9.3, narrow, [&](std::size_t) { ++b; });
  CHECK(b < a);
}

TEST_CASE("single vote casts") {
  GridGeometry g;
  g.dims = {20, 20, 20};
  AccumulatorGrid grid(g);
  CHECK(cast_offset_vote(grid, Point3(10.5, 10.5, 10.5), Vector3(3, 0, 0)) == 1);
  CHECK(grid.at(7, 10, 10) == 1);
  CHECK(cast_offset_vote(grid, Point3(1, 1, 1), Vector3(5, 0, 0)) == 0);
  CHECK(grid.dropped_votes() == 1);
  CHECK(cast_sphere_vote(grid, Point3(10, 10, 10), 0.0) == 1);  // radius 0 votes the point's own voxel
  CHECK(grid.at(10, 10, 10) == 1);
  CHECK(cast_sphere_vote(grid, Point3(500, 500, 500), 2.0) == 0);
  CHECK(grid.dropped_votes() == 2);
  CHECK(cast_ray_vote(grid, Point3(0.5, 0.5, 0.5), Vector3(0, 0, 1)) == 20);
  CHECK(grid.total() == 22);
}

TEST_CASE("grid construction") {
  const std::vector<Point3> pts{Point3(0, 0, 0), Point3(10, 4, 2)};
  const GridGeometry box = grid_geometry_for(pts, 1.0, 3.0);
  CHECK(box.origin == Point3(-1, -1, -1));
  CHECK(box.dims == std::array<int, 3>{4, 2, 2});
  const GridGeometry cube = grid_geometry_for(pts, 1.0, 3.0, GridShape::Cube);
  CHECK(cube.dims == std::array<int, 3>{4, 4, 4});
  CHECK(cube.origin.isApprox(Point3(-1, -4, -5)));
  CHECK(box.memory_bytes() == 4 * 16);
  CHECK_THROWS_AS(grid_geometry_for({}, 1.0, 1.0), SizeError);
  CHECK_THROWS_AS(grid_geometry_for(pts, 1.0, 0.0), ParameterError);
  GridGeometry bad;
  bad.dims = {0, 1, 1};
  CHECK_THROWS_AS(AccumulatorGrid{bad}, SizeError);
  bad.dims = {1 << 10, 1 << 10, 1 << 10};
  CHECK_THROWS_AS(AccumulatorGrid{bad}, SizeError);

  GridGeometry g;
  g.origin = Point3(-2, 3, 5);
  g.resolution = 2.5;
  g.dims = {7, 5, 3};
  for (std::size_t i = 0; i < g.voxel_count(); ++i) {
    const auto v = g.voxel_coords(i);
    CHECK(g.linear_index(v[0], v[1], v[2]) == i);
    CHECK(g.voxel_of(g.voxel_center(v[0], v[1], v[2])) == v);
  }
  CHECK(!g.voxel_of(g.max_corner()).has_value());
  CHECK(g.voxel_of(g.origin) == std::array<int, 3>{0, 0, 0});
}

TEST_CASE("merge is an element-wise sum") {
  std::mt19937_64 rng(25);
  GridGeometry g;
  g.dims = {9, 8, 7};
  std::vector<AccumulatorGrid> grids(3, AccumulatorGrid(g));
  std::uniform_int_distribution<std::uint32_t> u(0, 1000);
  for (std::size_t k = 0; k < grids.size(); ++k) {
    for (auto& c : grids[k].counts()) c = u(rng);
    grids[k].add_dropped(k + 1);
  }
  const AccumulatorGrid m = merge_grids(grids);
  for (std::size_t i = 0; i < g.voxel_count(); ++i)
    CHECK(m.counts()[i] == grids[0].counts()[i] + grids[1].counts()[i] + grids[2].counts()[i]);
  CHECK(m.dropped_votes() == 6);
  CHECK(m.total() == grids[0].total() + grids[1].total() + grids[2].total());

  GridGeometry other = g;
  other.resolution = 2.0;
  std::vector<AccumulatorGrid> mixed{AccumulatorGrid(g), AccumulatorGrid(other)};
  CHECK_THROWS_AS(merge_grids(mixed), IncompatibleGridError);
  CHECK_THROWS_AS(merge_grids(std::span<const AccumulatorGrid>{}), SizeError);
  std::vector<AccumulatorGrid> big(2, AccumulatorGrid(g));
  big[0].counts()[5] = 0xFFFFFFF0u;
  big[1].counts()[5] = 0x20u;
  CHECK_THROWS_AS(merge_grids(big), NumericalError);
}

TEST_CASE("peak search") {
  GridGeometry g;
  g.dims = {5, 5, 5};
  AccumulatorGrid grid(g);
  CHECK_THROWS_AS(find_peak(grid), NoPeakError);
  grid.counts()[g.linear_index(3, 1, 2)] = 7;
  grid.counts()[g.linear_index(1, 2, 3)] = 7;
  grid.counts()[g.linear_index(4, 4, 4)] = 6;
  const PeakResult p = find_peak(grid);
  CHECK(p.count == 7);
  CHECK(p.voxel == std::array<int, 3>{3, 1, 2});  // smaller linear index wins the tie
  CHECK(p.location == Point3(3.5, 1.5, 2.5));
  CHECK(!p.refined);

  AccumulatorGrid r(g);
  r.counts()[g.linear_index(2, 2, 2)] = 3;
  r.counts()[g.linear_index(3, 2, 2)] = 1;
  const PeakResult q = find_peak(r, true);
  CHECK(q.refined);
  CHECK(q.location.isApprox(Point3(2.75, 2.5, 2.5)));
  CHECK_THROWS_AS(find_peak(AccumulatorGrid{}), NoPeakError);
}

TEST_CASE("cast_votes is independent of the thread count") {
  for (Scheme scheme : kAllSchemes) {
    const GroundTruthRender r = render(31, scheme);
    const GridGeometry g = search_geometry(r.frame, 150.0, 4.0);
    for (const VoteMap& map : r.maps) {
      AccumulatorGrid one(g), four(g);
      CastOptions o1, o4;
      o4.threads = 4;
      const VoteStats s1 = cast_votes(one, map, r.frame, o1);
      const VoteStats s4 = cast_votes(four, map, r.frame, o4);
      CHECK(one == four);
      CHECK(s1.votes == s4.votes);
      CHECK(s1.increments == s4.increments);
      CHECK(s1.dropped == s4.dropped);
      CHECK(s1.votes == map.mask_count());
      CHECK(one.total() == s1.increments);
    }
  }
}

TEST_CASE("max_votes keeps evenly spaced pixels") {
  const GroundTruthRender r = render(32, Scheme::Offset);
  const VoteMap& map = r.maps[0];
  const GridGeometry g = search_geometry(r.frame, 150.0, 4.0);
  std::vector<std::size_t> pixels;
  for (int v = 0; v < map.height; ++v)
    for (int u = 0; u < map.width; ++u)
      if (map.masked(u, v)) pixels.push_back(map.mask.index(u, v));
  REQUIRE(pixels.size() > 300);
  const std::size_t cap = 300;
  AccumulatorGrid expected(g), got(g);
  for (std::size_t i = 0; i < cap; ++i) {
    const std::size_t idx = pixels[i * pixels.size() / cap];
    const int u = static_cast<int>(idx % static_cast<std::size_t>(map.width));
    const int v = static_cast<int>(idx / static_cast<std::size_t>(map.width));
    const Point3 p = backproject({u, v, r.frame.depth(u, v)}, r.frame.intrinsics);
    cast_offset_vote(expected, p, Vector3(map.value(u, v, 0), map.value(u, v, 1), map.value(u, v, 2)));
  }
  CastOptions o;
  o.max_votes = cap;
  const VoteStats st = cast_votes(got, map, r.frame, o);
  CHECK(st.votes == cap);
  CHECK(got == expected);
}

TEST_CASE("noiseless maps peak in the keypoint voxel or one of its neighbours") {
  for (Scheme scheme : kAllSchemes)
    for (double rho : {1.0, 4.0}) {
      const GroundTruthRender r = render(33, scheme);
      std::mt19937_64 rng(33);
      const PointCloud model = sample_box_shell(Vector3(80, 50, 40), 2.0);
      const RigidTransform pose = random_object_pose(model, CameraIntrinsics::linemod(), rng);
      const KeypointSet kps = bbox_keypoints(model, 2.0);
      const GridGeometry g = search_geometry(r.frame, 150.0, rho);
      for (std::size_t j = 0; j < r.maps.size(); ++j) {
        AccumulatorGrid grid(g);
        CastOptions o;
        o.max_votes = 1500;
        cast_votes(grid, r.maps[j], r.frame, o);
        const Point3 truth = pose.apply(kps.keypoints[j == 0 ? 0 : 7]);
        INFO(to_string(scheme), " rho ", rho, " kp ", j);
        const auto tv = g.voxel_of(truth);
        REQUIRE(tv.has_value());
        const auto pv = find_peak(grid).voxel;
        for (int a = 0; a < 3; ++a) CHECK(std::abs(pv[a] - (*tv)[a]) <= 1);
      }
    }
}

TEST_CASE("grid blob round trip and corruption") {
  std::mt19937_64 rng(34);
  GridGeometry g;
  g.origin = Point3(-1.25, 3.5, 1e3);
  g.resolution = 2.5;
  g.dims = {6, 5, 4};
  AccumulatorGrid grid(g);
  std::uniform_int_distribution<std::uint32_t> u;
  for (auto& c : grid.counts()) c = u(rng);
  grid.add_dropped(42);
  const auto bytes = serialize_grid(grid);
  CHECK(bytes.size() == 4 + 4 + 24 + 8 + 12 + 8 + 4 * g.voxel_count());
  CHECK(deserialize_grid(bytes) == grid);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_grid(bad), BlobFormatError);
  bad = bytes;
  bad[4] = 9;
  CHECK_THROWS_AS(deserialize_grid(bad), BlobFormatError);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(deserialize_grid(bad), BlobFormatError);
  bad = bytes;
  bad.push_back(0);
  CHECK_THROWS_AS(deserialize_grid(bad), BlobFormatError);
  CHECK_THROWS_AS(deserialize_grid(std::span<const std::uint8_t>(bytes.data(), 10)), BlobFormatError);
  bad = bytes;
  for (int i = 40; i < 44; ++i) bad[static_cast<std::size_t>(i)] = 0;  // dims[0] = 0
  CHECK_THROWS_AS(deserialize_grid(bad), BlobFormatError);

  // truncation at every length is rejected without crashing
  for (std::size_t n = 0; n < bytes.size(); n += 7)
    CHECK_THROWS_AS(deserialize_grid(std::span<const std::uint8_t>(bytes.data(), n)), BlobFormatError);

  const auto dir = std::filesystem::temp_directory_path() / "radvote_blob_test";
  std::filesystem::create_directories(dir);
  save_grid_blob(dir / "g.rvag", grid);
  CHECK(load_grid_blob(dir / "g.rvag") == grid);
  CHECK_THROWS_AS(load_grid_blob(dir / "missing.rvag"), IoError);
  std::filesystem::remove_all(dir);
}
