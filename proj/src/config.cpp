#include "radvote/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include <json.hpp>

#include "radvote/data_io.hpp"
#include "radvote/error.hpp"

namespace radvote {

namespace {

struct KindName {
  ExperimentKind kind;
  std::string_view name;
};
constexpr KindName kKinds[] = {
    {ExperimentKind::SchemeComparison, "scheme_comparison"}, {ExperimentKind::DispersionSweep, "dispersion_sweep"},
    {ExperimentKind::ResolutionSweep, "resolution_sweep"},   {ExperimentKind::KeypointCount, "keypoint_count"},
    {ExperimentKind::Ensemble, "ensemble"},                  {ExperimentKind::VoteOnce, "vote_once"},
};

}  // namespace

std::string_view to_string(ExperimentKind k) noexcept {
  for (const auto& e : kKinds)
    if (e.kind == k) return e.name;
  return "?";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (const auto& e : kKinds)
    if (e.name == name) return e.kind;
  throw ConfigError("kind", "unknown experiment '" + std::string(name) + "'");
}

std::string_view to_string(KeypointSetKind k) noexcept { return k == KeypointSetKind::Surface ? "surface" : "disperse"; }

NoiseSpec NoiseModel::spec_for(Scheme scheme, std::uint64_t seed) const {
  NoiseSpec s;
  s.kind = kind;
  s.mask_flip_rate = mask_flip_rate;
  s.rng_seed = seed;
  if (const auto it = per_scheme.find(scheme); it != per_scheme.end()) {
    s.magnitude = it->second;
    return s;
  }
  const bool length = scheme == Scheme::Offset || scheme == Scheme::Radial;
  s.magnitude = {length ? sigma * length_unit_mm : sigma};
  return s;
}

void ExperimentSpec::validate() const {
  auto fail = [](const std::string& field, const std::string& what) { throw ConfigError(field, what); };
  if (objects.empty() && models.empty()) fail("objects", "at least one object or model is required");
  for (const auto& m : models) {
    if (m.name.empty()) fail("models.name", "must not be empty");
    if (m.path.empty()) fail("models.path", "must not be empty");
    if (!(m.units_to_mm > 0.0) || !std::isfinite(m.units_to_mm)) fail("models.units_to_mm", "must be positive");
  }
  if (schemes.empty()) fail("schemes", "must not be empty");
  if (keypoint_sets.empty()) fail("keypoint_sets", "must not be empty");
  if (resolutions.empty()) fail("resolutions", "must not be empty");
  for (double r : resolutions)
    if (!(r > 0.0) || !std::isfinite(r)) fail("resolutions", "every resolution must be positive");
  if (scales.empty()) fail("scales", "must not be empty");
  for (double s : scales)
    if (!(s > 0.0) || !std::isfinite(s)) fail("scales", "every scale must be positive");
  if (keypoint_counts.empty()) fail("keypoint_counts", "must not be empty");
  for (int k : keypoint_counts)
    if (k < 3 || k > 8) fail("keypoint_counts", "K must lie in [3, 8]");
  if (frames < 1) fail("frames", "must be >= 1");
  if (trials < 1) fail("trials", "must be >= 1");
  if (!(perturbation_mm >= 0.0)) fail("perturbation_mm", "must be >= 0");
  if (!(noise.sigma >= 0.0) || !std::isfinite(noise.sigma)) fail("noise.sigma", "must be >= 0");
  if (!(noise.length_unit_mm > 0.0)) fail("noise.length_unit_mm", "must be positive");
  if (!(noise.mask_flip_rate >= 0.0 && noise.mask_flip_rate < 1.0)) fail("noise.mask_flip_rate", "must lie in [0, 1)");
  for (const auto& [s, mags] : noise.per_scheme) {
    if (mags.empty()) fail("noise.per_scheme", "magnitude list must not be empty");
    for (double m : mags)
      if (!(m >= 0.0) || !std::isfinite(m)) fail("noise.per_scheme", "magnitudes must be >= 0");
  }
  if (threads < 1) fail("threads", "must be >= 1");
  if (!(coarse_resolution >= 0.0)) fail("coarse_resolution", "must be >= 0");
  if (!(window_factor >= 1.0)) fail("window_factor", "must be >= 1");
  if (!(occlusion >= 0.0 && occlusion < 1.0)) fail("occlusion", "must lie in [0, 1)");
  if (!(auc_max_mm > 0.0)) fail("auc_max_mm", "must be positive");
  if (!(accuracy_fraction > 0.0)) fail("accuracy_fraction", "must be positive");
  if (timing_repeats < 1) fail("timing_repeats", "must be >= 1");
  if (!(model_spacing > 0.0)) fail("model_spacing", "must be positive");
  if (!(extent_mm >= 0.0) || !std::isfinite(extent_mm)) fail("extent_mm", "must be >= 0");
}

namespace {

using nlohmann::json;

double get_number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ConfigError(field, "expected a number");
  return j.get<double>();
}

bool get_bool(const json& j, const std::string& field) {
  if (!j.is_boolean()) throw ConfigError(field, "expected true or false");
  return j.get<bool>();
}

std::string get_string(const json& j, const std::string& field) {
  if (!j.is_string()) throw ConfigError(field, "expected a string");
  return j.get<std::string>();
}

long long get_integer(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw ConfigError(field, "expected an integer");
  return j.get<long long>();
}

template <typename F>
auto get_list(const json& j, const std::string& field, F item) {
  if (!j.is_array()) throw ConfigError(field, "expected a list");
  std::vector<decltype(item(j, field))> out;
  for (const auto& e : j) out.push_back(item(e, field));
  return out;
}

Scheme get_scheme(const json& j, const std::string& field) {
  const std::string s = get_string(j, field);
  try {
    return parse_scheme(s);
  } catch (const ParameterError&) {
    throw ConfigError(field, "unknown scheme '" + s + "'");
  }
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& prefix) {
  for (const auto& [k, v] : obj.items()) {
    if (!known.count(k)) throw ConfigError(prefix + k, "unknown key");
  }
}

NoiseModel parse_noise(const json& j) {
  if (!j.is_object()) throw ConfigError("noise", "expected an object");
  reject_unknown(j, {"sigma", "length_unit_mm", "mask_flip_rate", "kind", "per_scheme"}, "noise.");
  NoiseModel n;
  if (j.contains("sigma")) n.sigma = get_number(j["sigma"], "noise.sigma");
  if (j.contains("length_unit_mm")) n.length_unit_mm = get_number(j["length_unit_mm"], "noise.length_unit_mm");
  if (j.contains("mask_flip_rate")) n.mask_flip_rate = get_number(j["mask_flip_rate"], "noise.mask_flip_rate");
  if (j.contains("kind")) {
    const std::string k = get_string(j["kind"], "noise.kind");
    if (k == "gaussian") {
      n.kind = NoiseSpec::Kind::GaussianPerChannel;
    } else if (k == "uniform") {
      n.kind = NoiseSpec::Kind::UniformPerChannel;
    } else {
      throw ConfigError("noise.kind", "expected 'gaussian' or 'uniform'");
    }
  }
  if (j.contains("per_scheme")) {
    const json& ps = j["per_scheme"];
    if (!ps.is_object()) throw ConfigError("noise.per_scheme", "expected an object");
    for (const auto& [k, v] : ps.items()) {
      const std::string field = "noise.per_scheme." + k;
      const Scheme s = get_scheme(json(k), field);
      n.per_scheme[s] = get_list(v, field, get_number);
    }
  }
  return n;
}

ModelSource parse_model(const json& j) {
  if (!j.is_object()) throw ConfigError("models", "each model must be an object");
  reject_unknown(j, {"name", "path", "units_to_mm"}, "models.");
  for (const char* required : {"name", "path", "units_to_mm"}) {
    if (!j.contains(required)) throw ConfigError(std::string("models.") + required, "missing required field");
  }
  ModelSource m;
  m.name = get_string(j["name"], "models.name");
  m.path = get_string(j["path"], "models.path");
  m.units_to_mm = get_number(j["units_to_mm"], "models.units_to_mm");
  return m;
}

}  // namespace

ExperimentSpec parse_config(std::string_view text) {
  ExperimentSpec spec;
  const bool blank = std::all_of(text.begin(), text.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
  if (!blank) {
    json root;
    try {
      root = json::parse(text.begin(), text.end(), nullptr, true, true);
    } catch (const json::parse_error& e) {
      throw ConfigError("<file>", std::string("not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("<file>", "top level must be an object");
    static const std::set<std::string> known{
        "kind", "name", "objects", "models", "schemes", "keypoint_sets", "resolutions", "scales", "keypoint_counts",
        "frames", "trials", "perturbation_mm", "noise", "seed", "threads", "coarse_resolution", "window_factor",
        "max_votes", "refine", "icp", "sphere_rule", "occlusion", "auc_max_mm", "accuracy_fraction", "timing",
        "timing_repeats", "model_spacing", "extent_mm"};
    reject_unknown(root, known, "");

    for (const auto& [key, v] : root.items()) {
      if (key == "kind") {
        spec.kind = parse_experiment_kind(get_string(v, key));
      } else if (key == "name") {
        spec.name = get_string(v, key);
      } else if (key == "objects") {
        spec.objects = get_list(v, key, get_string);
      } else if (key == "models") {
        if (!v.is_array()) throw ConfigError(key, "expected a list");
        spec.models.clear();
        for (const auto& m : v) spec.models.push_back(parse_model(m));
      } else if (key == "schemes") {
        spec.schemes = get_list(v, key, get_scheme);
      } else if (key == "keypoint_sets") {
        spec.keypoint_sets = get_list(v, key, [](const json& e, const std::string& f) {
          const std::string s = get_string(e, f);
          if (s == "surface") return KeypointSetKind::Surface;
          if (s == "disperse") return KeypointSetKind::Disperse;
          throw ConfigError(f, "expected 'surface' or 'disperse'");
        });
      } else if (key == "resolutions") {
        spec.resolutions = get_list(v, key, get_number);
      } else if (key == "scales") {
        spec.scales = get_list(v, key, get_number);
      } else if (key == "keypoint_counts") {
        const auto ks = get_list(v, key, get_integer);
        spec.keypoint_counts.assign(ks.begin(), ks.end());
        for (long long k : ks)
          if (k < 3 || k > 8) throw ConfigError(key, "K must lie in [3, 8]");
      } else if (key == "frames") {
        const long long n = get_integer(v, key);
        if (n < 1 || n > 1000000) throw ConfigError(key, "must lie in [1, 1e6]");
        spec.frames = static_cast<int>(n);
      } else if (key == "trials") {
        const long long n = get_integer(v, key);
        if (n < 1 || n > 1000000) throw ConfigError(key, "must lie in [1, 1e6]");
        spec.trials = static_cast<int>(n);
      } else if (key == "perturbation_mm") {
        spec.perturbation_mm = get_number(v, key);
      } else if (key == "noise") {
        spec.noise = parse_noise(v);
      } else if (key == "seed") {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
          throw ConfigError(key, "expected a non-negative integer");
        }
        spec.seed = v.get<std::uint64_t>();
      } else if (key == "threads") {
        const long long n = get_integer(v, key);
        if (n < 1 || n > 1024) throw ConfigError(key, "must lie in [1, 1024]");
        spec.threads = static_cast<unsigned>(n);
      } else if (key == "coarse_resolution") {
        spec.coarse_resolution = get_number(v, key);
      } else if (key == "window_factor") {
        spec.window_factor = get_number(v, key);
      } else if (key == "max_votes") {
        const long long n = get_integer(v, key);
        if (n < 0) throw ConfigError(key, "must be >= 0");
        spec.max_votes = static_cast<std::size_t>(n);
      } else if (key == "refine") {
        spec.refine = get_bool(v, key);
      } else if (key == "icp") {
        spec.icp = get_bool(v, key);
      } else if (key == "sphere_rule") {
        const std::string s = get_string(v, key);
        if (s == "shell") {
          spec.sphere_rule = SphereRule::Shell;
        } else if (s == "andres_slices") {
          spec.sphere_rule = SphereRule::AndresSlices;
        } else if (s == "supercover") {
          spec.sphere_rule = SphereRule::Supercover;
        } else {
          throw ConfigError(key, "expected 'shell', 'andres_slices' or 'supercover'");
        }
      } else if (key == "occlusion") {
        spec.occlusion = get_number(v, key);
      } else if (key == "auc_max_mm") {
        spec.auc_max_mm = get_number(v, key);
      } else if (key == "accuracy_fraction") {
        spec.accuracy_fraction = get_number(v, key);
      } else if (key == "timing") {
        spec.timing = get_bool(v, key);
      } else if (key == "timing_repeats") {
        const long long n = get_integer(v, key);
        if (n < 1 || n > 1000) throw ConfigError(key, "must lie in [1, 1000]");
        spec.timing_repeats = static_cast<int>(n);
      } else if (key == "model_spacing") {
        spec.model_spacing = get_number(v, key);
      } else if (key == "extent_mm") {
        spec.extent_mm = get_number(v, key);
      }
    }
  }
  spec.validate();
  return spec;
}

ExperimentSpec load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path)); }

}  // namespace radvote
