#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "radvote/accumulator.hpp"
#include "radvote/vote_maps.hpp"

namespace radvote {

enum class ExperimentKind { SchemeComparison, DispersionSweep, ResolutionSweep, KeypointCount, Ensemble, VoteOnce };

std::string_view to_string(ExperimentKind k) noexcept;
ExperimentKind parse_experiment_kind(std::string_view name);

enum class KeypointSetKind { Surface, Disperse };
std::string_view to_string(KeypointSetKind k) noexcept;

// Regressor stand-in. One magnitude `sigma` in regressor output units is
// applied to every channel; length channels (offset, radial) are expressed in
// units of `length_unit_mm`, direction channels are unitless or radians.
// `per_scheme` replaces the derived magnitudes for the listed schemes.
struct NoiseModel {
  // sigma putting the disperse ape radial error near 1.8 mm at 1 mm voxels.
  static constexpr double kCalibratedSigma = 0.012;

  double sigma = 0.0;
  double length_unit_mm = 100.0;
  double mask_flip_rate = 0.0;
  NoiseSpec::Kind kind = NoiseSpec::Kind::GaussianPerChannel;
  std::map<Scheme, std::vector<double>> per_scheme;

  NoiseSpec spec_for(Scheme scheme, std::uint64_t seed) const;
  bool operator==(const NoiseModel&) const = default;
};

// Object loaded from disk instead of the procedural stand-ins.
struct ModelSource {
  std::string name;
  std::filesystem::path path;
  double units_to_mm = 1.0;
  bool operator==(const ModelSource&) const = default;
};

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::SchemeComparison;
  std::string name;  // output base name; defaults to the kind
  std::vector<std::string> objects{"ape", "driller", "eggbox"};
  std::vector<ModelSource> models;
  std::vector<Scheme> schemes{Scheme::Radial, Scheme::Offset, Scheme::Vector, Scheme::Polar};
  std::vector<KeypointSetKind> keypoint_sets{KeypointSetKind::Surface, KeypointSetKind::Disperse};
  std::vector<double> resolutions{5.0};  // mm
  std::vector<double> scales{1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<int> keypoint_counts{3};
  int frames = 50;
  int trials = 100;
  double perturbation_mm = 1.5;
  NoiseModel noise;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double coarse_resolution = 8.0;  // mm, 0 disables
  double window_factor = 4.0;
  std::size_t max_votes = 0;
  bool refine = false;
  bool icp = false;
  SphereRule sphere_rule = SphereRule::Shell;
  double occlusion = 0.0;      // fraction of masked pixels removed
  double auc_max_mm = 100.0;
  double accuracy_fraction = 0.10;
  bool timing = false;          // fill wall_ms (breaks byte-identical CSVs)
  int timing_repeats = 5;
  double model_spacing = 1.0;   // mm between procedural surface samples
  // Edge of a fixed cubic search lattice centred on the visible points, voted
  // in one pass at each resolution; 0 pads the visible box instead.
  double extent_mm = 0.0;

  // Throws ConfigError naming the offending field.
  void validate() const;
  bool operator==(const ExperimentSpec&) const = default;
};

// JSON object with the field names above; nested "noise" object and "models"
// array. Unknown keys, wrong types and invalid values are rejected; an empty
// file yields the defaults.
ExperimentSpec parse_config(std::string_view text);
ExperimentSpec load_config(const std::filesystem::path& path);

}  // namespace radvote
