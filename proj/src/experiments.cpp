#include "radvote/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <numbers>
#include <random>
#include <thread>

#include "radvote/data_io.hpp"
#include "radvote/error.hpp"

namespace radvote {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); }

// Runs fn(i) for i in [0, n). Every index runs exactly once; the exception of
// the lowest failing index is rethrown, as in the sequential order.
template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& fn) {
  const auto workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::uint64_t name_hash(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  return h;
}

// Frame f of an object sees the same pose for every scheme, keypoint set and
// resolution.
std::uint64_t frame_seed(std::uint64_t seed, const std::string& object, std::uint64_t f) {
  return trial_seed(trial_seed(seed, name_hash(object)), f);
}

std::uint64_t noise_seed(std::uint64_t frame, std::size_t keypoint) { return trial_seed(frame, 1 + keypoint); }

struct ObjectContext {
  SyntheticObject object;
  PointCloud metric_model;
};

struct Scene {
  RigidTransform pose;
  DepthFrame frame;
  Mask mask;
  std::uint64_t seed = 0;
};

Scene render_scene(const SyntheticObject& obj, const ExperimentSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const CameraIntrinsics cam = CameraIntrinsics::linemod();
  Scene s;
  s.seed = seed;
  s.pose = random_object_pose(obj.model, cam, rng);
  KeypointSet centre;
  centre.keypoints = {obj.model.centroid()};
  GroundTruthRender r = generate_gt_maps(obj.model, s.pose, centre, cam, Scheme::Radial);
  s.frame = std::move(r.frame);
  s.mask = std::move(r.maps.front().mask);
  if (spec.occlusion > 0.0) {
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    s.mask = occlude_half_plane(s.mask, spec.occlusion, angle(rng));
  }
  return s;
}

std::vector<Point3> camera_keypoints(const KeypointSet& kps, const RigidTransform& pose) {
  std::vector<Point3> out;
  out.reserve(kps.size());
  for (const auto& k : kps.keypoints) out.push_back(pose.apply(k));
  return out;
}

// Padding that reaches every keypoint from any visible surface point.
double search_margin(const SyntheticObject& obj, const KeypointSet& kps) {
  const Point3 c = obj.model.centroid();
  double d = 0.0;
  for (const auto& k : kps.keypoints) d = std::max(d, (k - c).norm());
  return d + obj.radius;
}

LocalizationOptions localization_options(const ExperimentSpec& spec, double resolution, double margin) {
  LocalizationOptions o;
  o.resolution = resolution;
  o.coarse_resolution = spec.coarse_resolution;
  o.window_factor = spec.window_factor;
  o.search_margin = margin;
  o.fixed_extent = spec.extent_mm;
  o.refine = spec.refine;
  o.cast.sphere.rule = spec.sphere_rule;
  o.cast.max_votes = spec.max_votes;
  o.cast.threads = 1;  // parallelism lives at the trial level
  return o;
}

KeypointVote timed_localize(const DepthFrame& frame, std::span<const VoteMap> maps, const LocalizationOptions& o,
                            const ExperimentSpec& spec, std::optional<double>& wall) {
  if (!spec.timing) return localize_keypoint(frame, maps, o);
  std::vector<double> times;
  KeypointVote kv;
  for (int r = 0; r < spec.timing_repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    kv = localize_keypoint(frame, maps, o);
    times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  wall = wall.value_or(0.0) + median(std::move(times));
  return kv;
}

struct Outcome {
  std::vector<double> kp_errors;
  double add = 0.0;
  double adds = 0.0;
  std::uint64_t votes = 0;
  std::uint64_t drops = 0;
  std::uint64_t mem = 0;
  std::optional<double> wall;

  void record(const KeypointVote& kv, const Point3& truth) {
    kp_errors.push_back((kv.location - truth).norm());
    votes += kv.stats.votes;
    drops += kv.stats.dropped;
    mem = std::max(mem, kv.memory_bytes);
  }
};

PointCloud scene_cloud(const Scene& sc) {
  PointCloud out;
  const auto& d = sc.frame.depth;
  for (int v = 0; v < d.height; ++v)
    for (int u = 0; u < d.width; ++u)
      if (sc.mask(u, v) && sc.frame.valid(u, v)) out.points.push_back(backproject({u, v, d(u, v)}, sc.frame.intrinsics));
  return out;
}

// Model points facing the camera under `pose`; all points without normals.
PointCloud facing_points(const PointCloud& model, const RigidTransform& pose) {
  if (!model.has_normals()) return model;
  PointCloud out;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const Point3 p = pose.apply(model.points[i]);
    if ((pose.rotation * model.normals[i]).dot(p) < 0.0) out.points.push_back(model.points[i]);
  }
  return out.empty() ? model : out;
}

void score_pose(const ObjectContext& ctx, const Scene& sc, const KeypointSet& kps, std::span<const Point3> est,
                const ExperimentSpec& spec, Outcome& out) {
  RigidTransform pose = recover_pose(kps, est);
  if (spec.icp) {
    const PointCloud scene = scene_cloud(sc);
    if (!scene.empty()) pose = icp_refine(facing_points(ctx.metric_model, pose), scene, pose).pose;
  }
  out.add = add_metric(ctx.metric_model, sc.pose, pose);
  out.adds = adds_metric(ctx.metric_model, sc.pose, pose);
}

double scored_value(const ObjectContext& ctx, const Outcome& o) { return ctx.object.symmetric ? o.adds : o.add; }

CsvRow row_proto(const std::string& experiment, const std::string& object, std::string scheme,
                 std::optional<double> resolution, std::optional<double> scale, int k) {
  CsvRow r;
  r.experiment = experiment;
  r.object = object;
  r.scheme = std::move(scheme);
  r.resolution_mm = resolution;
  r.scale = scale;
  r.keypoints = k;
  return r;
}

CsvRow trial_row(CsvRow row, const ObjectContext& ctx, const Outcome& o, const ExperimentSpec& spec) {
  const MeanStd kp = mean_std(o.kp_errors);
  const double v = scored_value(ctx, o);
  row.kp_err_mean_mm = kp.mean;
  row.kp_err_std_mm = kp.stddev;
  row.add_mm = o.add;
  row.adds_mm = o.adds;
  row.accuracy = accuracy_at_threshold(std::span<const double>(&v, 1), ctx.object.radius, spec.accuracy_fraction);
  row.auc = auc_metric(std::span<const double>(&v, 1), spec.auc_max_mm);
  row.votes = o.votes;
  row.drops = o.drops;
  row.wall_ms = o.wall;
  row.mem_bytes = o.mem;
  return row;
}

void summarize(CsvRow row, const ObjectContext& ctx, std::span<const Outcome> outs, const ExperimentSpec& spec,
               ExperimentResult& result) {
  EvalReport rep;
  std::vector<double> scored;
  std::vector<double> walls;
  row.votes = row.drops = row.mem_bytes = 0;
  for (const auto& o : outs) {
    rep.keypoint_errors.insert(rep.keypoint_errors.end(), o.kp_errors.begin(), o.kp_errors.end());
    rep.add_values.push_back(o.add);
    rep.adds_values.push_back(o.adds);
    scored.push_back(scored_value(ctx, o));
    row.votes += o.votes;
    row.drops += o.drops;
    row.mem_bytes = std::max(row.mem_bytes, o.mem);
    if (o.wall) walls.push_back(*o.wall);
  }
  rep.kp_error = mean_std(rep.keypoint_errors);
  rep.accuracy = accuracy_at_threshold(scored, ctx.object.radius, spec.accuracy_fraction);
  rep.auc = auc_metric(scored, spec.auc_max_mm);
  row.seed = spec.seed;
  row.kp_err_mean_mm = rep.kp_error.mean;
  row.kp_err_std_mm = rep.kp_error.stddev;
  row.add_mm = mean_std(rep.add_values).mean;
  row.adds_mm = mean_std(rep.adds_values).mean;
  row.accuracy = rep.accuracy;
  row.auc = rep.auc;
  row.wall_ms = walls.empty() ? std::nullopt : std::optional<double>(median(walls));
  result.summary.push_back(std::move(row));
  result.reports.push_back(std::move(rep));
}

const KeypointSet& keypoint_set(const SyntheticObject& obj, KeypointSetKind k) {
  return k == KeypointSetKind::Surface ? obj.surface : obj.disperse;
}

std::vector<ObjectContext> contexts(const ExperimentSpec& spec) {
  std::vector<ObjectContext> out;
  for (auto& o : resolve_objects(spec)) {
    PointCloud m = metric_subsample(o.model);
    out.push_back({std::move(o), std::move(m)});
  }
  return out;
}

std::string experiment_name(const ExperimentSpec& spec) {
  return spec.name.empty() ? std::string(to_string(spec.kind)) : spec.name;
}

// scheme_comparison and resolution_sweep: each (object, set, scheme, rho)
// group localizes every keypoint of its set on `frames` scenes.
ExperimentResult run_localization(const ExperimentSpec& spec) {
  struct Group {
    std::size_t object;
    KeypointSetKind set;
    Scheme scheme;
    double resolution;
  };
  const auto ctxs = contexts(spec);
  std::vector<Group> groups;
  for (std::size_t oi = 0; oi < ctxs.size(); ++oi)
    for (auto set : spec.keypoint_sets)
      for (auto scheme : spec.schemes)
        for (double rho : spec.resolutions) groups.push_back({oi, set, scheme, rho});

  const auto frames = static_cast<std::size_t>(spec.frames);
  std::vector<Outcome> outcomes(groups.size() * frames);
  parallel_for(outcomes.size(), spec.threads, [&](std::size_t i) {
    const Group& g = groups[i / frames];
    const ObjectContext& ctx = ctxs[g.object];
    const KeypointSet& kps = keypoint_set(ctx.object, g.set);
    const Scene sc = render_scene(ctx.object, spec, frame_seed(spec.seed, ctx.object.name, i % frames));
    const auto truth = camera_keypoints(kps, sc.pose);
    const auto maps = compute_maps(sc.frame, sc.mask, truth, g.scheme);
    const auto opts = localization_options(spec, g.resolution, search_margin(ctx.object, kps));
    Outcome& out = outcomes[i];
    std::vector<Point3> est;
    for (std::size_t j = 0; j < maps.size(); ++j) {
      const VoteMap noisy = apply_noise(maps[j], spec.noise.spec_for(g.scheme, noise_seed(sc.seed, j)));
      const KeypointVote kv = timed_localize(sc.frame, std::span<const VoteMap>(&noisy, 1), opts, spec, out.wall);
      out.record(kv, truth[j]);
      est.push_back(kv.location);
    }
    score_pose(ctx, sc, kps, est, spec, out);
  });

  ExperimentResult result;
  const std::string name = experiment_name(spec);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const Group& g = groups[gi];
    const ObjectContext& ctx = ctxs[g.object];
    const KeypointSet& kps = keypoint_set(ctx.object, g.set);
    const CsvRow proto = row_proto(name, ctx.object.name, std::string(to_string(g.scheme)), g.resolution, kps.dispersion_scale,
                 static_cast<int>(kps.size()));
    const std::span<const Outcome> outs(outcomes.data() + gi * frames, frames);
    for (std::size_t f = 0; f < frames; ++f) {
      CsvRow row = proto;
      row.seed = frame_seed(spec.seed, ctx.object.name, f);
      result.trials.push_back(trial_row(std::move(row), ctx, outs[f], spec));
    }
    summarize(proto, ctx, outs, spec, result);
  }
  return result;
}

// Pose recovery from perturbed bounding-box keypoints: one perturbation set
// per trial, reused at every scale.
ExperimentResult run_dispersion(const ExperimentSpec& spec) {
  const auto ctxs = contexts(spec);
  const auto trials = static_cast<std::size_t>(spec.trials);
  const auto nscales = spec.scales.size();
  const auto K = static_cast<std::size_t>(spec.keypoint_counts.front());
  const CameraIntrinsics cam = CameraIntrinsics::linemod();
  std::vector<Outcome> outcomes(ctxs.size() * trials * nscales);

  parallel_for(ctxs.size() * trials, spec.threads, [&](std::size_t i) {
    const ObjectContext& ctx = ctxs[i / trials];
    const std::size_t t = i % trials;
    std::mt19937_64 rng(frame_seed(spec.seed, ctx.object.name, t));
    Scene sc;
    sc.pose = random_object_pose(ctx.object.model, cam, rng);
    std::vector<Vector3> perturb;
    for (std::size_t j = 0; j < K; ++j) perturb.push_back(spec.perturbation_mm * random_unit_vector(rng));
    const auto pick = spread_subset(bbox_keypoints(ctx.object.model, 1.0).keypoints, K);
    for (std::size_t s = 0; s < nscales; ++s) {
      const KeypointSet kps = bbox_keypoints(ctx.object.model, spec.scales[s]).subset(pick);
      std::vector<Point3> est = camera_keypoints(kps, sc.pose);
      Outcome& out = outcomes[((i / trials) * nscales + s) * trials + t];
      for (std::size_t j = 0; j < K; ++j) {
        est[j] += perturb[j];
        out.kp_errors.push_back(perturb[j].norm());
      }
      score_pose(ctx, sc, kps, est, spec, out);
    }
  });

  ExperimentResult result;
  const std::string name = experiment_name(spec);
  for (std::size_t oi = 0; oi < ctxs.size(); ++oi) {
    const ObjectContext& ctx = ctxs[oi];
    for (std::size_t s = 0; s < nscales; ++s) {
      const CsvRow proto = row_proto(name, ctx.object.name, "", std::nullopt, spec.scales[s], static_cast<int>(K));
      const std::span<const Outcome> outs(outcomes.data() + (oi * nscales + s) * trials, trials);
      for (std::size_t t = 0; t < trials; ++t) {
        CsvRow row = proto;
        row.seed = frame_seed(spec.seed, ctx.object.name, t);
        result.trials.push_back(trial_row(std::move(row), ctx, outs[t], spec));
      }
      summarize(proto, ctx, outs, spec, result);
    }
  }
  return result;
}

// Nested keypoint sets: K keypoints are the first K of the largest set.
KeypointSet nested_keypoints(const SyntheticObject& obj, KeypointSetKind set, std::size_t k) {
  if (set == KeypointSetKind::Surface) return fps_keypoints(obj.model, k);
  const KeypointSet corners = bbox_keypoints(obj.model, 2.0);
  PointCloud cloud;
  cloud.points = corners.keypoints;
  KeypointSet out = fps_keypoints(cloud, k);
  out.selection_method = corners.selection_method;
  out.dispersion_scale = corners.dispersion_scale;
  return out;
}

ExperimentResult run_keypoint_count(const ExperimentSpec& spec) {
  struct Group {
    std::size_t object;
    KeypointSetKind set;
    Scheme scheme;
    KeypointSet keypoints;  // largest K
  };
  const auto ctxs = contexts(spec);
  const auto kmax = static_cast<std::size_t>(*std::max_element(spec.keypoint_counts.begin(), spec.keypoint_counts.end()));
  std::vector<Group> groups;
  for (std::size_t oi = 0; oi < ctxs.size(); ++oi)
    for (auto set : spec.keypoint_sets)
      for (auto scheme : spec.schemes) groups.push_back({oi, set, scheme, nested_keypoints(ctxs[oi].object, set, kmax)});

  const auto trials = static_cast<std::size_t>(spec.trials);
  const auto nk = spec.keypoint_counts.size();
  const double rho = spec.resolutions.front();
  std::vector<Outcome> outcomes(groups.size() * nk * trials);
  parallel_for(groups.size() * trials, spec.threads, [&](std::size_t i) {
    const Group& g = groups[i / trials];
    const std::size_t t = i % trials;
    const ObjectContext& ctx = ctxs[g.object];
    const Scene sc = render_scene(ctx.object, spec, frame_seed(spec.seed, ctx.object.name, t));
    const auto truth = camera_keypoints(g.keypoints, sc.pose);
    const auto maps = compute_maps(sc.frame, sc.mask, truth, g.scheme);
    const auto opts = localization_options(spec, rho, search_margin(ctx.object, g.keypoints));
    std::vector<KeypointVote> votes;
    std::optional<double> wall;
    for (std::size_t j = 0; j < maps.size(); ++j) {
      const VoteMap noisy = apply_noise(maps[j], spec.noise.spec_for(g.scheme, noise_seed(sc.seed, j)));
      std::optional<double> w;
      votes.push_back(timed_localize(sc.frame, std::span<const VoteMap>(&noisy, 1), opts, spec, w));
      if (w) wall = wall.value_or(0.0) + *w;
    }
    for (std::size_t ki = 0; ki < nk; ++ki) {
      const auto K = static_cast<std::size_t>(spec.keypoint_counts[ki]);
      Outcome& out = outcomes[((i / trials) * nk + ki) * trials + t];
      std::vector<std::size_t> first(K);
      for (std::size_t j = 0; j < K; ++j) first[j] = j;
      std::vector<Point3> est;
      for (std::size_t j = 0; j < K; ++j) {
        out.record(votes[j], truth[j]);
        est.push_back(votes[j].location);
      }
      if (wall) out.wall = *wall;
      score_pose(ctx, sc, g.keypoints.subset(first), est, spec, out);
    }
  });

  ExperimentResult result;
  const std::string name = experiment_name(spec);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const Group& g = groups[gi];
    const ObjectContext& ctx = ctxs[g.object];
    for (std::size_t ki = 0; ki < nk; ++ki) {
      const CsvRow proto = row_proto(name, ctx.object.name, std::string(to_string(g.scheme)), rho, g.keypoints.dispersion_scale,
                   spec.keypoint_counts[ki]);
      const std::span<const Outcome> outs(outcomes.data() + (gi * nk + ki) * trials, trials);
      for (std::size_t t = 0; t < trials; ++t) {
        CsvRow row = proto;
        row.seed = frame_seed(spec.seed, ctx.object.name, t);
        result.trials.push_back(trial_row(std::move(row), ctx, outs[t], spec));
      }
      summarize(proto, ctx, outs, spec, result);
    }
  }
  return result;
}

// Every non-empty subset of spec.schemes votes into one accumulator per
// keypoint; subsets ordered by size, then by position in spec.schemes.
ExperimentResult run_ensemble(const ExperimentSpec& spec) {
  std::vector<std::vector<Scheme>> combos;
  const std::size_t n = spec.schemes.size();
  if (n > 8) throw ConfigError("schemes", "ensemble supports at most 8 schemes");
  for (std::size_t size = 1; size <= n; ++size)
    for (std::uint32_t bits = 1; bits < (1u << n); ++bits) {
      if (static_cast<std::size_t>(std::popcount(bits)) != size) continue;
      std::vector<Scheme> c;
      for (std::size_t s = 0; s < n; ++s)
        if (bits & (1u << s)) c.push_back(spec.schemes[s]);
      combos.push_back(std::move(c));
    }
  struct Group {
    std::size_t object;
    KeypointSetKind set;
    std::size_t combo;
  };
  const auto ctxs = contexts(spec);
  std::vector<Group> groups;
  for (std::size_t oi = 0; oi < ctxs.size(); ++oi)
    for (auto set : spec.keypoint_sets)
      for (std::size_t c = 0; c < combos.size(); ++c) groups.push_back({oi, set, c});

  const auto frames = static_cast<std::size_t>(spec.frames);
  const double rho = spec.resolutions.front();
  std::vector<Outcome> outcomes(groups.size() * frames);
  parallel_for(outcomes.size(), spec.threads, [&](std::size_t i) {
    const Group& g = groups[i / frames];
    const ObjectContext& ctx = ctxs[g.object];
    const KeypointSet& kps = keypoint_set(ctx.object, g.set);
    const Scene sc = render_scene(ctx.object, spec, frame_seed(spec.seed, ctx.object.name, i % frames));
    const auto truth = camera_keypoints(kps, sc.pose);
    const auto opts = localization_options(spec, rho, search_margin(ctx.object, kps));
    std::vector<std::vector<VoteMap>> per_scheme;
    for (Scheme s : combos[g.combo]) per_scheme.push_back(compute_maps(sc.frame, sc.mask, truth, s));
    Outcome& out = outcomes[i];
    std::vector<Point3> est;
    for (std::size_t j = 0; j < kps.size(); ++j) {
      std::vector<VoteMap> maps;
      for (std::size_t s = 0; s < per_scheme.size(); ++s)
        maps.push_back(apply_noise(per_scheme[s][j], spec.noise.spec_for(combos[g.combo][s], noise_seed(sc.seed, j))));
      const KeypointVote kv = timed_localize(sc.frame, maps, opts, spec, out.wall);
      out.record(kv, truth[j]);
      est.push_back(kv.location);
    }
    score_pose(ctx, sc, kps, est, spec, out);
  });

  ExperimentResult result;
  const std::string name = experiment_name(spec);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const Group& g = groups[gi];
    const ObjectContext& ctx = ctxs[g.object];
    const KeypointSet& kps = keypoint_set(ctx.object, g.set);
    std::string label;
    for (Scheme s : combos[g.combo]) label += (label.empty() ? "" : "+") + std::string(to_string(s));
    const CsvRow proto = row_proto(name, ctx.object.name, label, rho, kps.dispersion_scale, static_cast<int>(kps.size()));
    const std::span<const Outcome> outs(outcomes.data() + gi * frames, frames);
    for (std::size_t f = 0; f < frames; ++f) {
      CsvRow row = proto;
      row.seed = frame_seed(spec.seed, ctx.object.name, f);
      result.trials.push_back(trial_row(std::move(row), ctx, outs[f], spec));
    }
    summarize(proto, ctx, outs, spec, result);
  }
  return result;
}

}  // namespace

std::string format_csv_row(const CsvRow& r) {
  std::string s;
  s += r.experiment + ',' + r.object + ',' + r.scheme + ',' + fmt_opt(r.resolution_mm) + ',' + fmt_opt(r.scale) + ',';
  s += std::to_string(r.keypoints) + ',' + std::to_string(r.seed) + ',';
  for (double v : {r.kp_err_mean_mm, r.kp_err_std_mm, r.add_mm, r.adds_mm, r.accuracy, r.auc}) s += fmt_double(v) + ',';
  s += std::to_string(r.votes) + ',' + std::to_string(r.drops) + ',' + fmt_opt(r.wall_ms) + ',' +
       std::to_string(r.mem_bytes);
  return s;
}

std::string format_csv(std::span<const CsvRow> rows) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : rows) out += format_csv_row(r) + '\n';
  return out;
}

PointCloud metric_subsample(const PointCloud& model, std::size_t max_points) {
  if (max_points == 0) throw ParameterError("metric_subsample: max_points must be positive");
  if (model.size() <= max_points) return model;
  PointCloud out;
  const bool normals = model.has_normals();
  for (std::size_t i = 0; i < max_points; ++i) {
    const std::size_t k = i * model.size() / max_points;
    out.points.push_back(model.points[k]);
    if (normals) out.normals.push_back(model.normals[k]);
  }
  return out;
}

std::vector<SyntheticObject> resolve_objects(const ExperimentSpec& spec) {
  std::vector<SyntheticObject> out;
  auto loaded = [&](const std::string& name) -> const ModelSource* {
    for (const auto& m : spec.models)
      if (m.name == name) return &m;
    return nullptr;
  };
  for (const auto& name : spec.objects) {
    if (const ModelSource* m = loaded(name)) {
      out.push_back(object_from_model(name, load_ply(m->path, m->units_to_mm)));
    } else {
      try {
        out.push_back(make_object(name, spec.model_spacing));
      } catch (const ParameterError& e) {
        throw ConfigError("objects", e.what());
      }
    }
  }
  for (const auto& m : spec.models)
    if (std::find(spec.objects.begin(), spec.objects.end(), m.name) == spec.objects.end())
      out.push_back(object_from_model(m.name, load_ply(m.path, m.units_to_mm)));
  return out;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case ExperimentKind::SchemeComparison:
    case ExperimentKind::ResolutionSweep:
      return run_localization(spec);
    case ExperimentKind::DispersionSweep:
      return run_dispersion(spec);
    case ExperimentKind::KeypointCount:
      return run_keypoint_count(spec);
    case ExperimentKind::Ensemble:
      return run_ensemble(spec);
    case ExperimentKind::VoteOnce:
      break;
  }
  throw ConfigError("kind", "vote_once produces a grid, not a report; use run_vote_once");
}

void write_experiment_csv(const ExperimentResult& result, const std::filesystem::path& dir, std::string_view name) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  const std::string base(name);
  write_text_file(dir / (base + "_trials.csv"), format_csv(result.trials));
  write_text_file(dir / (base + "_summary.csv"), format_csv(result.summary));
}

VoteOnceResult run_vote_once(const ExperimentSpec& spec, std::size_t keypoint) {
  spec.validate();
  const auto ctxs = contexts(spec);
  const ObjectContext& ctx = ctxs.front();
  const KeypointSet& kps = keypoint_set(ctx.object, spec.keypoint_sets.front());
  if (keypoint >= kps.size()) throw ParameterError("run_vote_once: keypoint index out of range");
  const Scheme scheme = spec.schemes.front();
  const double rho = spec.resolutions.front();
  const Scene sc = render_scene(ctx.object, spec, frame_seed(spec.seed, ctx.object.name, 0));
  const auto truth = camera_keypoints(kps, sc.pose);
  const auto maps = compute_maps(sc.frame, sc.mask, truth, scheme);
  const VoteMap noisy = apply_noise(maps[keypoint], spec.noise.spec_for(scheme, noise_seed(sc.seed, keypoint)));
  const GridGeometry g = spec.extent_mm > 0.0 ? centred_cube_geometry(sc.frame, spec.extent_mm, rho)
                                              : search_geometry(sc.frame, search_margin(ctx.object, kps), rho);
  VoteOnceResult out;
  out.grid = AccumulatorGrid(g);
  CastOptions cast;
  cast.sphere.rule = spec.sphere_rule;
  cast.max_votes = spec.max_votes;
  cast.threads = spec.threads;
  out.stats = cast_votes(out.grid, noisy, sc.frame, cast);
  out.peak = find_peak(out.grid, spec.refine);
  out.truth = truth[keypoint];
  out.error_mm = (out.peak.location - out.truth).norm();
  return out;
}

}  // namespace radvote
