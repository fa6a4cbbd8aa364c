#pragma once
// Small-scale oracle suites run by `radvote selftest`.

#include <cstdint>
#include <string>
#include <vector>

namespace radvote {

struct SelftestOptions {
  // Annulus half-width handed to the rasterizers; the oracles always use the
  // exact 1/2. Any other value must make the sphere suites fail.
  double annulus_half_width = 0.5;
  int instances = 25;  // per rasterizer and resolution
  std::uint64_t seed = 0;
};

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<SuiteResult> run_selftest(const SelftestOptions& options = {});

}  // namespace radvote
