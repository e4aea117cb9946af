#ifndef BLENDSA_CONFIG_HPP
#define BLENDSA_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "blendsa/engine.hpp"

namespace blendsa {

struct DeltaAxis {
  std::string mechanism;
  std::vector<double> grid;  // empty = use the method default at run time
};

// Parsed run configuration. Validation errors carry JSON-pointer-style
/// paths ("/plan/mechanisms/0/method: ..."). The seed is mandatory; there
// is no wall-clock fallback, so every run is reproducible by design.
struct RunConfig {
  std::string dataset;  // CSV path
  std::string schema;   // schema JSON path
  AnalysisPlan plan;
  DeltaMap delta;               // fixed sensitivity values
  std::vector<DeltaAxis> axes;  // sweep axes (grids take precedence over CLI)
  std::size_t M = 10;
  std::size_t B = 300;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  int threads = 0;  // 0 = resolve from BLENDSA_THREADS / hardware
  double weight_cap = 0.0;
  bool per_cell_ci = false;
  bool full_grid = false;
  std::string coefficient;                // tipping target
  std::vector<double> search_interval;    // tipping range, [lo, hi]
};

RunConfig load_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

// Plan (de)serialization shared by config files and plan-only JSON.
AnalysisPlan plan_from_json_text(const std::string& text);
std::string plan_to_json(const AnalysisPlan& plan);

// "lo:hi:step" grid syntax from the command line.
std::vector<double> parse_grid_spec(const std::string& spec);

// Inclusive arithmetic grid with end-point tolerance; values within
// step * 1e-6 of zero snap to exactly 0 so generated grids contain the
// reference point.
std::vector<double> expand_grid(double from, double to, double step);

// Default sweep grid for a mechanism: [-2, 2] step 0.1 for weighted
// mechanisms, [-6, 6] step 0.3 for imputed ones.
std::vector<double> default_grid(Method method);

}  // namespace blendsa

#endif
