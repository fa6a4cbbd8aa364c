// radvote: experiment runner and utilities. Exit codes: 0 success,
// 1 usage or configuration error, 2 I/O error, 3 numerical failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "radvote/config.hpp"
#include "radvote/data_io.hpp"
#include "radvote/error.hpp"
#include "radvote/experiments.hpp"
#include "radvote/selftest.hpp"

namespace {

using namespace radvote;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumerical = 3;

// Flags shared by the experiment subcommands; unset flags keep the config value.
struct Overrides {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::vector<double> resolutions;
  std::vector<std::string> schemes;
  std::optional<double> noise_sigma;
  std::vector<double> scales;
  std::vector<int> keypoints;
  std::vector<std::string> objects;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON experiment configuration");
  cmd->add_option("--out", o.out, "output directory for CSV files");
  cmd->add_option("--seed", o.seed, "base random seed");
  cmd->add_option("--threads", o.threads, "worker threads")->check(CLI::Range(1u, 1024u));
  cmd->add_option("--resolution", o.resolutions, "voxel edge(s) in mm")->delimiter(',');
  cmd->add_option("--scheme", o.schemes, "radial, offset, vector, polar")->delimiter(',');
  cmd->add_option("--noise-sigma", o.noise_sigma, "regressor noise magnitude");
  cmd->add_option("--scale", o.scales, "dispersion scale(s)")->delimiter(',');
  cmd->add_option("--keypoints", o.keypoints, "keypoint count(s) K")->delimiter(',');
  cmd->add_option("--object", o.objects, "object name(s)")->delimiter(',');
}

ExperimentSpec build_spec(const Overrides& o, ExperimentKind kind) {
  ExperimentSpec spec = o.config.empty() ? ExperimentSpec{} : load_config(o.config);
  spec.kind = kind;
  if (o.seed) spec.seed = *o.seed;
  if (o.threads) spec.threads = *o.threads;
  if (!o.resolutions.empty()) spec.resolutions = o.resolutions;
  if (!o.schemes.empty()) {
    spec.schemes.clear();
    for (const auto& s : o.schemes) {
      try {
        spec.schemes.push_back(parse_scheme(s));
      } catch (const ParameterError&) {
        throw ConfigError("--scheme", "unknown scheme '" + s + "'");
      }
    }
  }
  if (o.noise_sigma) spec.noise.sigma = *o.noise_sigma;
  if (!o.scales.empty()) spec.scales = o.scales;
  if (!o.keypoints.empty()) spec.keypoint_counts = o.keypoints;
  if (!o.objects.empty()) spec.objects = o.objects;
  spec.validate();
  return spec;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("-"); }

int run_and_report(const ExperimentSpec& spec, const std::string& out) {
  const std::string name = spec.name.empty() ? std::string(to_string(spec.kind)) : spec.name;
  spdlog::info("running {} (seed {}, {} thread(s))", name, spec.seed, spec.threads);
  const ExperimentResult result = run_experiment(spec);
  write_experiment_csv(result, out, name);
  std::printf("%-10s %-24s %8s %6s %3s %10s %10s %10s %9s\n", "object", "scheme", "rho_mm", "scale", "K", "err_mean",
              "err_std", "add_mm", "accuracy");
  for (const auto& r : result.summary) {
    std::printf("%-10s %-24s %8s %6s %3d %10.4f %10.4f %10.4f %9.4f\n", r.object.c_str(),
                r.scheme.empty() ? "-" : r.scheme.c_str(), fmt_opt(r.resolution_mm).c_str(), fmt_opt(r.scale).c_str(),
                r.keypoints, r.kp_err_mean_mm, r.kp_err_std_mm, r.add_mm, r.accuracy);
  }
  spdlog::info("wrote {}/{}_trials.csv and {}_summary.csv", out, name, name);
  return kExitOk;
}

int run_metrics(const std::string& model_path, double units, const std::string& gt_path, const std::string& est_path,
                double fraction, double auc_max) {
  const PointCloud model = load_ply(model_path, units);
  const auto gt = load_poses(gt_path);
  const auto est = load_poses(est_path);
  if (gt.size() != est.size()) throw SizeError("pose files hold different record counts");
  if (gt.empty()) throw SizeError("pose files are empty");
  const double radius = object_radius(model);
  std::vector<double> adds_values, add_values;
  std::printf("index,object,add_mm,adds_mm\n");
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double add = add_metric(model, gt[i].pose, est[i].pose);
    const double adds = adds_metric(model, gt[i].pose, est[i].pose);
    add_values.push_back(add);
    adds_values.push_back(adds);
    std::printf("%zu,%s,%.9g,%.9g\n", i, gt[i].object_id.c_str(), add, adds);
  }
  std::printf("# accuracy(ADD)=%.6f accuracy(ADD-S)=%.6f auc(ADD)=%.6f auc(ADD-S)=%.6f radius_mm=%.6f\n",
              accuracy_at_threshold(add_values, radius, fraction), accuracy_at_threshold(adds_values, radius, fraction),
              auc_metric(add_values, auc_max), auc_metric(adds_values, auc_max), radius);
  return kExitOk;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("radvote");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("RADVOTE_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Keypoint voting experiments and utilities"};
  app.require_subcommand(1);

  struct Command {
    const char* name;
    const char* help;
    ExperimentKind kind;
  };
  const Command experiments[] = {
      {"scheme-compare", "keypoint error per voting scheme", ExperimentKind::SchemeComparison},
      {"dispersion", "pose error versus keypoint dispersion", ExperimentKind::DispersionSweep},
      {"resolution", "keypoint error, time and memory versus voxel size", ExperimentKind::ResolutionSweep},
      {"keypoints", "pose accuracy versus keypoint count", ExperimentKind::KeypointCount},
      {"ensemble", "multi-scheme accumulators", ExperimentKind::Ensemble},
  };
  std::vector<Overrides> overrides(std::size(experiments) + 1);
  std::vector<CLI::App*> commands;
  for (std::size_t i = 0; i < std::size(experiments); ++i) {
    commands.push_back(app.add_subcommand(experiments[i].name, experiments[i].help));
    add_common(commands.back(), overrides[i]);
  }

  Overrides& vo = overrides.back();
  std::size_t vo_keypoint = 0;
  std::string vo_dump;
  CLI::App* vote_once = app.add_subcommand("vote-once", "vote one keypoint and report the peak");
  add_common(vote_once, vo);
  vote_once->add_option("--keypoint-index", vo_keypoint, "keypoint index within the set");
  vote_once->add_option("--dump", vo_dump, "write the accumulator blob here");

  std::string m_model, m_gt, m_est;
  double m_units = 1.0, m_fraction = 0.10, m_auc = 100.0;
  CLI::App* metrics = app.add_subcommand("metrics", "ADD, ADD-S, accuracy and AUC for pose files");
  metrics->add_option("--model", m_model, "PLY model")->required();
  metrics->add_option("--units-to-mm", m_units, "model unit scale");
  metrics->add_option("--gt", m_gt, "ground-truth pose file")->required();
  metrics->add_option("--est", m_est, "estimated pose file")->required();
  metrics->add_option("--fraction", m_fraction, "accuracy threshold as a fraction of the object radius");
  metrics->add_option("--auc-max", m_auc, "AUC threshold range in mm");

  SelftestOptions st;
  std::optional<double> mutate;
  CLI::App* selftest = app.add_subcommand("selftest", "oracle equivalence suites");
  selftest->add_option("--mutate-annulus", mutate, "rasterize spheres with this annulus half-width (test hook)");
  selftest->add_option("--seed", st.seed, "instance seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (std::size_t i = 0; i < commands.size(); ++i)
      if (commands[i]->parsed()) return run_and_report(build_spec(overrides[i], experiments[i].kind), overrides[i].out);

    if (vote_once->parsed()) {
      const ExperimentSpec spec = build_spec(vo, ExperimentKind::VoteOnce);
      const VoteOnceResult r = run_vote_once(spec, vo_keypoint);
      const auto& g = r.grid.geometry();
      std::printf("peak %.6f %.6f %.6f count %u\n", r.peak.location.x(), r.peak.location.y(), r.peak.location.z(),
                  r.peak.count);
      std::printf("truth %.6f %.6f %.6f error_mm %.6f\n", r.truth.x(), r.truth.y(), r.truth.z(), r.error_mm);
      std::printf("grid %d x %d x %d at %.6g mm, %llu bytes, votes %llu, dropped %llu\n", g.dims[0], g.dims[1], g.dims[2],
                  g.resolution, static_cast<unsigned long long>(g.memory_bytes()),
                  static_cast<unsigned long long>(r.stats.votes), static_cast<unsigned long long>(r.stats.dropped));
      if (!vo_dump.empty()) save_grid_blob(vo_dump, r.grid);
      return kExitOk;
    }
    if (metrics->parsed()) return run_metrics(m_model, m_units, m_gt, m_est, m_fraction, m_auc);
    if (selftest->parsed()) {
      if (mutate) st.annulus_half_width = *mutate;
      bool ok = true;
      for (const auto& s : run_selftest(st)) {
        std::printf("%s %s: %s\n", s.passed ? "PASS" : "FAIL", s.name.c_str(), s.detail.c_str());
        ok = ok && s.passed;
      }
      return ok ? kExitOk : kExitNumerical;
    }
  } catch (const ParameterError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  } catch (const NumericalError& e) {
    spdlog::error("{}", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitNumerical;
  }
  return kExitUsage;
}
