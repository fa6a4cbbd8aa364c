// Acceptance run: one PASS/FAIL line per criterion 1-8, details indented
// below it. Arguments select criteria by number (default: all). Exit status is
// 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "radvote/experiments.hpp"
#include "radvote/selftest.hpp"

using namespace radvote;

namespace {

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok   " : "MISS ") + what);
  }
  void info(const std::string& what) { notes.push_back("info " + what); }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentSpec base_spec(ExperimentKind kind) {
  ExperimentSpec s;
  s.kind = kind;
  s.seed = 2024;
  s.threads = 1;
  s.max_votes = 1000;
  s.window_factor = 2.0;
  return s;
}

const CsvRow* find_row(const ExperimentResult& r, const std::string& object, const std::string& scheme,
                       std::optional<double> scale = std::nullopt, std::optional<double> rho = std::nullopt,
                       std::optional<int> k = std::nullopt) {
  for (const auto& row : r.summary)
    if (row.object == object && row.scheme == scheme && (!scale || row.scale == scale) &&
        (!rho || row.resolution_mm == rho) && (!k || row.keypoints == *k))
      return &row;
  return nullptr;
}

const char* set_name(double scale) { return scale == 1.0 ? "surface" : "disperse"; }

// 1. Noiseless voting lands within the 1 mm voxel on average.
Verdict criterion1() {
  Verdict v;
  ExperimentSpec s = base_spec(ExperimentKind::SchemeComparison);
  s.resolutions = {1.0};
  s.keypoint_sets = {KeypointSetKind::Surface};
  s.frames = 50;
  for (const auto& o : resolve_objects(s)) {
    const Point3 c = o.model.centroid();
    v.info(fmt("%s: object radius %.1f mm, mean surface keypoint distance %.1f mm (reference %.1f)", o.name.c_str(),
               o.radius, o.surface.mean_distance_to(c), reference_mean_keypoint_distance(o.name)));
  }
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult r = run_experiment(s);
  const double secs = seconds_since(t0);
  for (const auto& row : r.summary)
    v.check(row.kp_err_mean_mm <= 1.0,
            fmt("%-8s %-7s mean keypoint error %.3f mm <= 1 (std %.3f, %d frames x %d keypoints)", row.object.c_str(),
                row.scheme.c_str(), row.kp_err_mean_mm, row.kp_err_std_mm, s.frames, row.keypoints));
  v.check(secs < 300.0, fmt("runtime %.1f s < 300 s", secs));
  return v;
}

// 2. Ranking under one calibrated noise model.
Verdict criterion2() {
  Verdict v;
  ExperimentSpec s = base_spec(ExperimentKind::SchemeComparison);
  s.resolutions = {1.0};
  s.frames = 50;  // x 4 keypoints = 200 keypoint trials per cell
  s.noise.sigma = NoiseModel::kCalibratedSigma;
  const ExperimentResult r = run_experiment(s);
  v.info(fmt("noise sigma %.4f (%.2f mm on offset/radial, %.4f on vector, %.4f rad on polar)", s.noise.sigma,
             s.noise.sigma * s.noise.length_unit_mm, s.noise.sigma, s.noise.sigma));
  const CsvRow* cal = find_row(r, "ape", "radial", 2.0);
  v.check(cal && std::abs(cal->kp_err_mean_mm - 1.8) <= 0.5,
          fmt("calibration: ape disperse radial mean %.3f mm within 1.8 +- 0.5", cal ? cal->kp_err_mean_mm : -1.0));
  for (const std::string obj : {"ape", "driller", "eggbox"}) {
    for (double scale : {1.0, 2.0}) {
      const CsvRow* rad = find_row(r, obj, "radial", scale);
      const CsvRow* pol = find_row(r, obj, "polar", scale);
      const CsvRow* off = find_row(r, obj, "offset", scale);
      const CsvRow* vec = find_row(r, obj, "vector", scale);
      const bool ok = rad && pol && off && vec && rad->kp_err_mean_mm < pol->kp_err_mean_mm &&
                      pol->kp_err_mean_mm < off->kp_err_mean_mm && off->kp_err_mean_mm < vec->kp_err_mean_mm;
      v.check(ok, fmt("%-8s %-8s radial %.3f < polar %.3f < offset %.3f < vector %.3f", obj.c_str(), set_name(scale),
                      rad->kp_err_mean_mm, pol->kp_err_mean_mm, off->kp_err_mean_mm, vec->kp_err_mean_mm));
    }
    const double rr = find_row(r, obj, "radial", 2.0)->kp_err_mean_mm / find_row(r, obj, "radial", 1.0)->kp_err_mean_mm;
    const double ro = find_row(r, obj, "offset", 2.0)->kp_err_mean_mm / find_row(r, obj, "offset", 1.0)->kp_err_mean_mm;
    v.check(rr < ro, fmt("%-8s disperse/surface ratio radial %.3f < offset %.3f", obj.c_str(), rr, ro));
  }
  return v;
}

// 3. Dispersion sweep with perturbed keypoints.
Verdict criterion3() {
  Verdict v;
  ExperimentSpec s = base_spec(ExperimentKind::DispersionSweep);
  s.trials = 100;
  s.scales = {1, 2, 3, 4, 5};
  s.keypoint_counts = {3};
  s.perturbation_mm = 1.5;
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult r = run_experiment(s);
  const double secs = seconds_since(t0);
  for (const std::string obj : {"ape", "driller", "eggbox"}) {
    std::map<int, double> add;
    for (int k = 1; k <= 5; ++k) add[k] = find_row(r, obj, "", static_cast<double>(k))->add_mm;
    v.info(fmt("%-8s mean ADD by scale: %.3f %.3f %.3f %.3f %.3f mm", obj.c_str(), add[1], add[2], add[3], add[4], add[5]));
    v.check(add[3] < add[1], fmt("%-8s ADD(3) %.3f < ADD(1) %.3f", obj.c_str(), add[3], add[1]));
    v.check(std::abs(add[5] - add[4]) < std::abs(add[2] - add[1]),
            fmt("%-8s |ADD(5)-ADD(4)| %.3f < |ADD(2)-ADD(1)| %.3f", obj.c_str(), std::abs(add[5] - add[4]),
                std::abs(add[2] - add[1])));
  }
  v.check(secs < 60.0, fmt("runtime %.1f s < 60 s", secs));
  return v;
}

// 4. Resolution sweep over a fixed 479 mm cube.
Verdict criterion4() {
  Verdict v;
  ExperimentSpec s = base_spec(ExperimentKind::ResolutionSweep);
  s.objects = {"ape"};
  s.schemes = {Scheme::Radial};
  s.keypoint_sets = {KeypointSetKind::Surface};
  s.resolutions = {1, 2, 4, 5, 8, 16};
  s.extent_mm = 479.0;
  s.noise.sigma = NoiseModel::kCalibratedSigma;
  s.frames = 10;
  s.timing = true;
  s.timing_repeats = 1;
  const ExperimentResult r = run_experiment(s);
  double prev_err = -1.0, prev_wall = std::numeric_limits<double>::infinity();
  for (double rho : s.resolutions) {
    const CsvRow* row = find_row(r, "ape", "radial", std::nullopt, rho);
    const auto d = static_cast<std::uint64_t>(std::ceil(479.0 / rho));
    v.check(row->mem_bytes == 4 * d * d * d,
            fmt("rho %4.0f mm: memory %llu bytes = 4*%llu^3 (%.2f MB)", rho,
                static_cast<unsigned long long>(row->mem_bytes), static_cast<unsigned long long>(d),
                static_cast<double>(row->mem_bytes) / 1e6));
    v.check(row->kp_err_mean_mm >= prev_err,
            fmt("rho %4.0f mm: mean error %.3f mm >= previous %.3f", rho, row->kp_err_mean_mm, prev_err));
    v.check(*row->wall_ms <= prev_wall,
            fmt("rho %4.0f mm: median voting wall %.2f ms <= previous %.2f", rho, *row->wall_ms, prev_wall));
    prev_err = row->kp_err_mean_mm;
    prev_wall = *row->wall_ms;
  }
  return v;
}

// 5. Rasterizers, Horn and metrics against brute force.
Verdict criterion5() {
  Verdict v;
  std::mt19937_64 rng(5);
  struct Rule {
    const char* name;
    SphereRule rule;
    std::set<std::size_t> (*oracle)(const GridGeometry&, const Point3&, double);
  };
  const Rule rules[] = {{"shell", SphereRule::Shell, oracle::shell_sphere},
                        {"andres_slices", SphereRule::AndresSlices, oracle::andres_sphere},
                        {"supercover", SphereRule::Supercover, oracle::supercover_sphere}};
  for (const auto& rule : rules)
    for (double rho : {1.0, 5.0}) {
      int mismatches = 0;
      for (int t = 0; t < 100; ++t) {
        const GridGeometry g = oracle::random_grid(rng, rho, 128);
        const Point3 c = oracle::random_point_near(rng, g);
        const double r = rho * std::uniform_real_distribution<double>(0.3, 60.0)(rng);
        SphereOptions o;
        o.rule = rule.rule;
        std::set<std::size_t> got;
        std::size_t visits = 0;
        for_each_sphere_voxel(g, c, r, o, [&](std::size_t i) {
          got.insert(i);
          ++visits;
        });
        if (got != rule.oracle(g, c, r) || visits != got.size()) ++mismatches;
      }
      v.check(mismatches == 0, fmt("sphere %-13s rho %.0f: %d/100 instances differ from brute force", rule.name, rho, mismatches));
    }
  for (double rho : {1.0, 5.0}) {
    int mismatches = 0;
    for (int t = 0; t < 100; ++t) {
      const GridGeometry g = oracle::random_grid(rng, rho, 128);
      const Point3 o = oracle::random_point_near(rng, g);
      const Vector3 d = oracle::random_direction(rng);
      std::set<std::size_t> got;
      for_each_ray_voxel(g, o, d, [&](std::size_t i) { got.insert(i); });
      if (got != oracle::ray(g, o, d)) ++mismatches;
    }
    v.check(mismatches == 0, fmt("ray rho %.0f: %d/100 instances differ from brute force", rho, mismatches));
  }

  double worst = 0.0;
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  std::uniform_int_distribution<int> n(3, 30);
  for (int t = 0; t < 1000; ++t) {
    std::vector<Point3> src(static_cast<std::size_t>(n(rng)));
    for (auto& p : src) p = Point3(u(rng), u(rng), u(rng));
    const RigidTransform truth = oracle::random_transform(rng);
    std::vector<Point3> dst;
    for (const auto& p : src) dst.push_back(truth.apply(p));
    const RigidTransform est = horn_solve(src, dst);
    for (const auto& p : src) worst = std::max(worst, (est.apply(p) - truth.apply(p)).norm());
  }
  v.check(worst < 1e-9, fmt("Horn: worst residual over 1000 transforms %.3g mm < 1e-9", worst));

  double add_err = 0.0, adds_err = 0.0, auc_err = 0.0;
  for (int t = 0; t < 20; ++t) {
    PointCloud m;
    const int count = t % 2 ? 300 : 5200;  // both sides of the k-d tree switch
    static_assert(kAddsTreeThreshold > 300 && kAddsTreeThreshold < 5200);
    for (int i = 0; i < count; ++i) m.points.emplace_back(u(rng) / 2, u(rng) / 2, u(rng) / 2);
    const RigidTransform a = oracle::random_transform(rng, 50.0), b = oracle::random_transform(rng, 50.0);
    add_err = std::max(add_err, std::abs(add_metric(m, a, b) - oracle::add(m.points, a, b)));
    adds_err = std::max(adds_err, std::abs(adds_metric(m, a, b) - oracle::adds(m.points, a, b)));
    std::vector<double> d(300);
    for (auto& x : d) x = std::abs(u(rng)) * 1.3;
    auc_err = std::max(auc_err, std::abs(auc_metric(d, 100.0) - oracle::auc_sampled(d, 100.0)));
  }
  v.check(add_err < 1e-9, fmt("ADD vs naive: %.3g < 1e-9", add_err));
  v.check(adds_err < 1e-9, fmt("ADD-S vs naive: %.3g < 1e-9", adds_err));
  v.check(auc_err < 1e-3, fmt("AUC vs sampled curve: %.3g < 1e-3", auc_err));
  return v;
}

// 6. Pose accuracy barely depends on K.
Verdict criterion6() {
  Verdict v;
  ExperimentSpec s = base_spec(ExperimentKind::KeypointCount);
  s.schemes = {Scheme::Radial};
  s.keypoint_sets = {KeypointSetKind::Surface};
  s.resolutions = {5.0};
  s.keypoint_counts = {3, 4, 8};
  s.trials = 200;
  s.noise.sigma = NoiseModel::kCalibratedSigma;
  const ExperimentResult r = run_experiment(s);
  for (const std::string obj : {"ape", "driller", "eggbox"}) {
    std::vector<double> acc;
    for (int k : s.keypoint_counts) acc.push_back(find_row(r, obj, "radial", std::nullopt, std::nullopt, k)->accuracy);
    const double spread = *std::max_element(acc.begin(), acc.end()) - *std::min_element(acc.begin(), acc.end());
    v.check(spread < 0.02, fmt("%-8s accuracy K=3 %.4f, K=4 %.4f, K=8 %.4f: spread %.2f pp < 2", obj.c_str(), acc[0],
                               acc[1], acc[2], 100.0 * spread));
  }
  return v;
}

// 7. Ensemble accumulators are exact sums; peaks are deterministic.
Verdict criterion7() {
  Verdict v;
  ExperimentSpec s = base_spec(ExperimentKind::VoteOnce);
  s.objects = {"driller"};
  s.noise.sigma = NoiseModel::kCalibratedSigma;
  s.resolutions = {4.0};
  std::vector<AccumulatorGrid> parts;
  for (Scheme scheme : {Scheme::Radial, Scheme::Offset, Scheme::Vector}) {
    s.schemes = {scheme};
    parts.push_back(run_vote_once(s, 0).grid);
  }
  const AccumulatorGrid merged = merge_grids(parts);
  bool exact = true;
  for (std::size_t i = 0; i < merged.counts().size(); ++i) {
    const std::uint64_t sum = std::uint64_t{parts[0].counts()[i]} + parts[1].counts()[i] + parts[2].counts()[i];
    exact = exact && merged.counts()[i] == sum;
  }
  v.check(exact, fmt("radial+offset+vector merge equals the element-wise sum over %zu voxels", merged.counts().size()));
  const PeakResult p0 = find_peak(merged);
  bool same = true;
  for (int t = 0; t < 5; ++t) {
    const PeakResult p = find_peak(merged);
    same = same && p.voxel == p0.voxel && p.count == p0.count;
  }
  s.threads = 4;
  std::vector<AccumulatorGrid> threaded;
  for (Scheme scheme : {Scheme::Radial, Scheme::Offset, Scheme::Vector}) {
    s.schemes = {scheme};
    threaded.push_back(run_vote_once(s, 0).grid);
  }
  const AccumulatorGrid merged4 = merge_grids(threaded);
  v.check(same && merged4 == merged && find_peak(merged4).voxel == p0.voxel,
          fmt("peak voxel (%d, %d, %d) count %u is identical over repeats and for 1 vs 4 threads", p0.voxel[0],
              p0.voxel[1], p0.voxel[2], p0.count));

  ExperimentSpec e = base_spec(ExperimentKind::Ensemble);
  e.schemes = {Scheme::Radial, Scheme::Offset, Scheme::Vector, Scheme::Polar};
  e.keypoint_sets = {KeypointSetKind::Surface};
  e.resolutions = {2.0};
  e.frames = 10;
  e.noise.sigma = NoiseModel::kCalibratedSigma;
  const ExperimentResult r = run_experiment(e);
  for (const std::string obj : {"ape", "driller", "eggbox"}) {
    const CsvRow* rad = find_row(r, obj, "radial");
    const CsvRow* best = nullptr;
    for (const auto& row : r.summary)
      if (row.object == obj && row.scheme.find('+') != std::string::npos &&
          (!best || row.kp_err_mean_mm < best->kp_err_mean_mm))
        best = &row;
    v.info(fmt("soft: %-8s radial %.3f mm vs best ensemble %s %.3f mm (%s)", obj.c_str(), rad->kp_err_mean_mm,
               best->scheme.c_str(), best->kp_err_mean_mm,
               rad->kp_err_mean_mm <= best->kp_err_mean_mm ? "radial ahead" : "ensemble ahead"));
  }
  return v;
}

// 8. Oracle suites pass and every experiment is thread-count independent.
Verdict criterion8() {
  Verdict v;
  for (const auto& suite : run_selftest({}))
    v.check(suite.passed, fmt("selftest %s: %s", suite.name.c_str(), suite.detail.c_str()));
  for (ExperimentKind kind : {ExperimentKind::SchemeComparison, ExperimentKind::ResolutionSweep,
                              ExperimentKind::DispersionSweep, ExperimentKind::KeypointCount, ExperimentKind::Ensemble}) {
    ExperimentSpec s = base_spec(kind);
    s.objects = {"ape", "eggbox"};
    s.frames = 4;
    s.trials = 8;
    s.max_votes = 400;
    s.resolutions = kind == ExperimentKind::ResolutionSweep ? std::vector<double>{4.0, 8.0} : std::vector<double>{4.0};
    s.noise.sigma = NoiseModel::kCalibratedSigma;
    s.icp = kind == ExperimentKind::SchemeComparison;
    s.occlusion = kind == ExperimentKind::SchemeComparison ? 0.2 : 0.0;
    if (kind == ExperimentKind::KeypointCount) s.keypoint_counts = {3, 5};
    if (kind == ExperimentKind::Ensemble) s.schemes = {Scheme::Radial, Scheme::Vector};
    const ExperimentResult a = run_experiment(s);
    s.threads = 4;
    const ExperimentResult b = run_experiment(s);
    const std::string ca = format_csv(a.trials) + format_csv(a.summary);
    const std::string cb = format_csv(b.trials) + format_csv(b.summary);
    v.check(ca == cb, fmt("%-17s CSV bit-identical for 1 vs 4 threads (%zu bytes)", std::string(to_string(kind)).c_str(),
                          ca.size()));
  }
  v.info("unit property suites run as separate ctest entries");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"noiseless voting error <= 1 mm at 1 mm voxels", criterion1},
      {"scheme ranking under one calibrated noise model", criterion2},
      {"dispersion sweep: improvement then plateau", criterion3},
      {"resolution sweep: error, time and memory", criterion4},
      {"rasterizer, Horn and metric oracles", criterion5},
      {"keypoint count insensitivity", criterion6},
      {"ensemble merge algebra and peak determinism", criterion7},
      {"property suites and thread determinism", criterion8},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    std::printf("%s criterion %d: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first, seconds_since(t0));
    for (const auto& n : v.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    failures += v.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
