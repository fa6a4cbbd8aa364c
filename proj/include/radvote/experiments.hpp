#pragma once
// Experiment drivers behind the CLI: every kind is deterministic under
// (spec, seed) and independent of spec.threads.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "radvote/accumulator.hpp"
#include "radvote/config.hpp"
#include "radvote/pipeline.hpp"
#include "radvote/synthetic.hpp"

namespace radvote {

inline constexpr std::string_view kCsvHeader =
    "experiment,object,scheme,resolution_mm,scale,K,seed,kp_err_mean_mm,kp_err_std_mm,add_mm,adds_mm,accuracy,auc,"
    "votes,drops,wall_ms,mem_bytes";

// One CSV line. Empty optionals print as empty fields. `scale` is the
// keypoint set's dispersion scale: 1 for surface (FPS) keypoints, 2 for the
// disperse bounding-box corners, the swept value in dispersion runs.
struct CsvRow {
  std::string experiment;
  std::string object;
  std::string scheme;  // ensembles join member schemes with '+'
  std::optional<double> resolution_mm;
  std::optional<double> scale;
  int keypoints = 0;
  std::uint64_t seed = 0;
  double kp_err_mean_mm = 0.0;
  double kp_err_std_mm = 0.0;
  double add_mm = 0.0;
  double adds_mm = 0.0;
  double accuracy = 0.0;
  double auc = 0.0;
  std::uint64_t votes = 0;
  std::uint64_t drops = 0;
  std::optional<double> wall_ms;
  std::uint64_t mem_bytes = 0;
};

std::string format_csv_row(const CsvRow& row);
// Header line plus one line per row, '\n' terminated.
std::string format_csv(std::span<const CsvRow> rows);

struct ExperimentResult {
  std::vector<CsvRow> trials;
  std::vector<CsvRow> summary;
  std::vector<EvalReport> reports;  // parallel to summary
};

// Objects named in spec.objects (procedural, or the loaded model of the same
// name from spec.models) followed by models not named there.
std::vector<SyntheticObject> resolve_objects(const ExperimentSpec& spec);

// Frames (scheme_comparison, resolution_sweep, ensemble) or trials
// (dispersion_sweep, keypoint_count) per object; see README for the layouts.
ExperimentResult run_experiment(const ExperimentSpec& spec);

// <dir>/<name>_trials.csv and <dir>/<name>_summary.csv; name defaults to the
// experiment kind.
void write_experiment_csv(const ExperimentResult& result, const std::filesystem::path& dir, std::string_view name);

// Single accumulator for keypoint `keypoint` of the first object, keypoint
// set and scheme, voted in one pass at the first resolution.
struct VoteOnceResult {
  AccumulatorGrid grid;
  PeakResult peak;
  Point3 truth = Point3::Zero();
  double error_mm = 0.0;
  VoteStats stats;
};
VoteOnceResult run_vote_once(const ExperimentSpec& spec, std::size_t keypoint = 0);

// At most `max_points` model points, evenly strided; metrics use this.
PointCloud metric_subsample(const PointCloud& model, std::size_t max_points = 4096);

}  // namespace radvote
