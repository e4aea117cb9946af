// Command-line front end: config ingestion, dataset I/O, sweep
// orchestration, CSV emission, and SVG heat maps for two-way sweeps.
// Exit codes: 0 success, 2 config/usage error, 3 numerical failure,
// 4 partial sweep (some cells failed; the CSV annotates them).
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "blendsa/bootstrap.hpp"
#include "blendsa/config.hpp"
#include "blendsa/csv.hpp"
#include "blendsa/engine.hpp"
#include "blendsa/error.hpp"
#include "blendsa/sim.hpp"
#include "blendsa/svg.hpp"
#include "blendsa/sweep.hpp"
#include "blendsa/table.hpp"

namespace {

using blendsa::AnalysisPlan;
using blendsa::Column;
using blendsa::ColumnKind;
using blendsa::ColumnTable;
using blendsa::RunConfig;

constexpr const char* kVersion = "0.1.0";

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw blendsa::Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw blendsa::Error("write failed for '" + path + "'");
}

std::string out_dir(const std::string& requested) {
  std::string dir = requested.empty() ? std::string(".") : requested;
  std::filesystem::create_directories(dir);
  return dir;
}

void write_manifest(const std::string& dir, const std::string& command,
                    const std::string& config_text, std::uint64_t seed) {
  nlohmann::json j;
  j["command"] = command;
  j["config_hash"] = hex64(fnv1a64(config_text));
  j["seed"] = seed;
  j["versions"]["blendsa"] = kVersion;
  j["versions"]["config_format"] = 1;
  write_text(dir + "/manifest.json", j.dump(2) + "\n");
}

// CSV plus its .schema.json sidecar so the file round-trips via read_csv.
void emit_table(const std::string& dir, const std::string& name,
                const ColumnTable& table) {
  blendsa::write_csv(dir + "/" + name + ".csv", table);
  blendsa::write_schema(dir + "/" + name + ".schema.json",
                        blendsa::schema_of(table));
}

Column continuous_column(std::vector<double> values,
                         std::vector<std::uint8_t> mask) {
  Column c;
  c.kind = ColumnKind::Continuous;
  c.values = std::move(values);
  c.mask = std::move(mask);
  return c;
}

Column binary_column(std::vector<double> values) {
  Column c;
  c.kind = ColumnKind::Binary;
  c.values = std::move(values);
  c.mask.assign(c.values.size(), 1);
  return c;
}

Column categorical_column(std::vector<double> indices,
                          std::vector<std::string> levels) {
  Column c;
  c.kind = ColumnKind::Categorical;
  c.values = std::move(indices);
  c.mask.assign(c.values.size(), 1);
  c.levels = std::move(levels);
  c.baseline = 0;
  return c;
}

ColumnTable load_dataset(const RunConfig& cfg) {
  const blendsa::TableSchema schema = blendsa::read_schema(cfg.schema);
  ColumnTable table = blendsa::read_csv(cfg.dataset, schema);
  blendsa::validate_plan(table, cfg.plan);
  return table;
}

std::size_t mechanism_index(const AnalysisPlan& plan, const std::string& name) {
  for (std::size_t k = 0; k < plan.mechanisms.size(); ++k) {
    if (plan.mechanisms[k].name == name) return k;
  }
  throw blendsa::ParseError("unknown mechanism '" + name + "'");
}

// --- simulate ---------------------------------------------------------

struct SimulateArgs {
  int scenario = 1;
  std::string assignment = "III";
  std::string grid_spec;
  std::size_t reps = 200;
  std::size_t n = 1000;
  std::size_t M = 10;
  std::size_t B = 0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::string out = ".";
  int threads = 0;
  bool gen_only = false;
  bool durable = false;
  double gen_delta2 = std::numeric_limits<double>::quiet_NaN();
  double gen_delta3 = std::numeric_limits<double>::quiet_NaN();
};

std::string join_grid(const std::vector<double>& grid) {
  std::string s;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i) s += ",";
    s += blendsa::format_value(grid[i]);
  }
  return s;
}

int cmd_simulate(const SimulateArgs& a) {
  const std::string dir = out_dir(a.out);
  if (a.durable && !a.gen_only) {
    throw blendsa::ParseError(
        "--durable writes a dataset and needs --gen-only (the bias study "
        "runs on the benchmark scenarios only)");
  }
  if (a.gen_only) {
    std::string config_text;
    if (a.durable) {
      const ColumnTable table = blendsa::generate_durable_like(a.n, a.seed);
      emit_table(dir, "durable", table);
      config_text = "command=simulate durable=1 n=" + std::to_string(a.n) +
                    " seed=" + std::to_string(a.seed);
    } else {
      const auto gen = blendsa::scenario_generation_delta(a.scenario);
      blendsa::ScenarioConfig cfg;
      cfg.n = a.n;
      cfg.delta2 = std::isnan(a.gen_delta2) ? gen.first : a.gen_delta2;
      cfg.delta3 = std::isnan(a.gen_delta3) ? gen.second : a.gen_delta3;
      cfg.seed = a.seed;
      const blendsa::ScenarioData data = blendsa::generate_scenario(cfg);
      emit_table(dir, "scenario", data.table);
      emit_table(dir, "scenario_latent", data.latent);
      config_text = "command=simulate gen_only=1 scenario=" +
                    std::to_string(a.scenario) + " n=" + std::to_string(a.n) +
                    " delta2=" + blendsa::format_value(cfg.delta2) +
                    " delta3=" + blendsa::format_value(cfg.delta3) +
                    " seed=" + std::to_string(a.seed);
    }
    write_manifest(dir, "simulate", config_text, a.seed);
    return 0;
  }

  // Validates the assignment up front so grid defaulting can trust it.
  const AnalysisPlan plan = blendsa::scenario_plan(a.assignment);
  const std::string varied = blendsa::varied_mechanism(a.scenario);
  std::vector<double> grid;
  if (!a.grid_spec.empty()) {
    grid = blendsa::parse_grid_spec(a.grid_spec);
  } else {
    grid = blendsa::default_grid(
        plan.mechanisms[mechanism_index(plan, varied)].method);
  }

  blendsa::ScenarioRun run;
  run.scenario = a.scenario;
  run.assignment = a.assignment;
  run.grid = grid;
  run.n = a.n;
  run.n_reps = a.reps;
  run.M = a.M;
  run.seed = a.seed;
  run.threads = a.threads;
  run.B = a.B;
  run.alpha = a.alpha;
  const blendsa::BiasReport report = blendsa::run_scenario(run);
  emit_table(dir, "bias", blendsa::bias_report_table(report));

  const std::string config_text =
      "command=simulate scenario=" + std::to_string(a.scenario) +
      " assignment=" + a.assignment + " grid=" + join_grid(grid) +
      " reps=" + std::to_string(a.reps) + " n=" + std::to_string(a.n) +
      " M=" + std::to_string(a.M) + " B=" + std::to_string(a.B) +
      " alpha=" + blendsa::format_value(a.alpha) +
      " seed=" + std::to_string(a.seed);
  write_manifest(dir, "simulate", config_text, a.seed);

  std::size_t failed = 0;
  for (const auto& cell : report.cells) failed += cell.n_failed;
  if (failed > 0) {
    std::cerr << "note: " << failed
              << " replication fits failed across the grid (counted in the "
                 "bias CSV)\n";
  }
  return 0;
}

// --- analyze ----------------------------------------------------------

int cmd_analyze(const RunConfig& cfg, const std::string& config_text) {
  const std::string dir = out_dir(cfg.out);
  const ColumnTable table = load_dataset(cfg);
  const blendsa::BlendedFit fit = blendsa::run_blended(
      table, cfg.plan, cfg.delta, cfg.M, cfg.seed, cfg.weight_cap);

  Eigen::VectorXd ci_lo, ci_hi;
  if (cfg.B > 0) {
    const blendsa::BootstrapResult boot = blendsa::bootstrap_mi(
        table, cfg.plan, cfg.delta, cfg.B, cfg.M, cfg.alpha, cfg.seed,
        cfg.threads, cfg.weight_cap);
    ci_lo = boot.ci_lower;
    ci_hi = boot.ci_upper;
  }

  const std::size_t p = fit.coef_names.size();
  ColumnTable est(p);
  {
    std::vector<double> idx(p), value(p), lo(p), hi(p), n_rows_col(p),
        ess_col(p);
    for (std::size_t i = 0; i < p; ++i) {
      idx[i] = static_cast<double>(i);
      value[i] = fit.theta_hat(static_cast<Eigen::Index>(i));
      if (cfg.B > 0) {
        lo[i] = ci_lo(static_cast<Eigen::Index>(i));
        hi[i] = ci_hi(static_cast<Eigen::Index>(i));
      }
      n_rows_col[i] = static_cast<double>(fit.n_analysis);
      double ess_min = std::numeric_limits<double>::infinity();
      for (double e : fit.analysis_ess) ess_min = std::min(ess_min, e);
      ess_col[i] = ess_min;
    }
    est.add_column("coef", categorical_column(idx, fit.coef_names));
    est.add_column("estimate",
                   continuous_column(value, std::vector<std::uint8_t>(p, 1)));
    if (cfg.B > 0) {
      est.add_column("ci_lo",
                     continuous_column(lo, std::vector<std::uint8_t>(p, 1)));
      est.add_column("ci_hi",
                     continuous_column(hi, std::vector<std::uint8_t>(p, 1)));
    }
    est.add_column("n_analysis", continuous_column(
                                     n_rows_col, std::vector<std::uint8_t>(p, 1)));
    est.add_column("ess_min",
                   continuous_column(ess_col, std::vector<std::uint8_t>(p, 1)));
  }
  emit_table(dir, "estimates", est);

  const std::size_t K = fit.diagnostics.size();
  ColumnTable diag(K);
  {
    std::vector<double> mech_idx(K), method_idx(K), min_pi(K), max_w(K),
        warn(K), ess_min(K);
    std::vector<std::uint8_t> weight_mask(K, 1), ess_mask(K, 1);
    std::vector<std::string> mech_levels;
    for (std::size_t k = 0; k < K; ++k) {
      const auto& d = fit.diagnostics[k];
      mech_levels.push_back(d.name);
      mech_idx[k] = static_cast<double>(k);
      method_idx[k] = d.method == blendsa::Method::Ipw
                          ? 0.0
                          : (d.method == blendsa::Method::Mi ? 1.0 : 2.0);
      const bool weighting = d.method != blendsa::Method::Mi;
      weight_mask[k] = weighting ? 1 : 0;
      min_pi[k] = d.min_pi;
      max_w[k] = d.max_weight;
      warn[k] = d.extreme_weight_warning ? 1.0 : 0.0;
      if (d.ess.empty()) {
        ess_mask[k] = 0;
        ess_min[k] = 0.0;
      } else {
        double m = std::numeric_limits<double>::infinity();
        for (double e : d.ess) m = std::min(m, e);
        ess_min[k] = m;
      }
    }
    diag.add_column("mechanism", categorical_column(mech_idx, mech_levels));
    diag.add_column("method",
                    categorical_column(method_idx, {"ipw", "mi", "cox"}));
    diag.add_column("min_pi", continuous_column(min_pi, weight_mask));
    diag.add_column("max_weight", continuous_column(max_w, weight_mask));
    Column warn_col = binary_column(warn);
    warn_col.mask = weight_mask;
    diag.add_column("extreme_weights", std::move(warn_col));
    diag.add_column("ess_min", continuous_column(ess_min, ess_mask));
  }
  emit_table(dir, "diagnostics", diag);

  write_manifest(dir, "analyze", config_text, cfg.seed);
  return 0;
}

// --- sweep ------------------------------------------------------------

std::vector<std::pair<std::string, std::vector<double>>> resolve_sweep_axes(
    const RunConfig& cfg, const std::vector<std::string>& cli_grids) {
  std::vector<blendsa::DeltaAxis> axes = cfg.axes;
  for (const std::string& entry : cli_grids) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw blendsa::ParseError("--grid expects MECHANISM=lo:hi:step, got '" +
                                entry + "'");
    }
    const std::string name = entry.substr(0, eq);
    const std::vector<double> grid =
        blendsa::parse_grid_spec(entry.substr(eq + 1));
    bool found = false;
    for (auto& ax : axes) {
      if (ax.mechanism != name) continue;
      found = true;
      if (ax.grid.empty()) ax.grid = grid;  // config grids take precedence
    }
    if (!found) axes.push_back(blendsa::DeltaAxis{name, grid});
  }
  if (axes.empty()) {
    throw blendsa::ParseError(
        "sweep needs at least one axis: list them under /axes in the config "
        "or pass --grid MECHANISM=lo:hi:step");
  }
  std::vector<std::pair<std::string, std::vector<double>>> out;
  for (auto& ax : axes) {
    std::vector<double> grid = ax.grid;
    if (grid.empty()) {
      const std::size_t k = mechanism_index(cfg.plan, ax.mechanism);
      grid = blendsa::default_grid(cfg.plan.mechanisms[k].method);
    }
    out.emplace_back(ax.mechanism, std::move(grid));
  }
  return out;
}

int cmd_sweep(const RunConfig& cfg, const std::vector<std::string>& cli_grids,
              const std::string& config_text) {
  const std::string dir = out_dir(cfg.out);
  const ColumnTable table = load_dataset(cfg);
  const auto axes = resolve_sweep_axes(cfg, cli_grids);

  if (axes.size() > 2 && !cfg.full_grid) {
    std::size_t cells = 1;
    for (const auto& ax : axes) cells *= ax.second.size();
    throw blendsa::ParseError(
        "refusing a " + std::to_string(axes.size()) + "-axis sweep (" +
        std::to_string(cells) +
        " cells) without full_grid; set full_grid in the config or pass "
        "--full-grid");
  }

  blendsa::SweepOptions opt;
  opt.M = cfg.M;
  opt.seed = cfg.seed;
  opt.B = cfg.per_cell_ci ? cfg.B : 0;
  opt.alpha = cfg.alpha;
  opt.weight_cap = cfg.weight_cap;
  opt.threads = cfg.threads;
  const blendsa::SweepResult sweep =
      blendsa::sweep_grid(table, cfg.plan, axes, opt);

  emit_table(dir, "sweep_long", blendsa::sweep_long_table(sweep));
  emit_table(dir, "sweep_cells", blendsa::sweep_cell_table(sweep));

  if (axes.size() == 2) {
    if (sweep.coef_names.empty()) {
      std::cerr << "note: every cell failed; skipping the heat map\n";
    } else {
      std::string coef = cfg.coefficient;
      if (coef.empty()) {
        coef = sweep.coef_names.front();
        for (const std::string& name : sweep.coef_names) {
          if (name != "(Intercept)") {
            coef = name;
            break;
          }
        }
      }
      write_text(dir + "/heatmap.svg",
                 blendsa::render_heatmap_svg(sweep, coef));
    }
  }

  write_manifest(dir, "sweep", config_text, cfg.seed);
  if (sweep.n_failed > 0) {
    std::cerr << "note: " << sweep.n_failed << " of " << sweep.cells.size()
              << " cells failed (annotated in the CSV)\n";
    return 4;
  }
  return 0;
}

// --- diagnose ---------------------------------------------------------

int cmd_diagnose(const RunConfig& cfg, const std::string& mechanism,
                 const std::string& grid_spec, const std::string& config_text) {
  const std::string dir = out_dir(cfg.out);
  const ColumnTable table = load_dataset(cfg);
  const std::size_t k = mechanism_index(cfg.plan, mechanism);
  const blendsa::SubMechanism& mech = cfg.plan.mechanisms[k];
  if (mech.method == blendsa::Method::CoxIpw) {
    throw blendsa::ParseError(
        "diagnose handles ipw and mi mechanisms; '" + mechanism +
        "' is a survival-weighting mechanism with no sensitivity departure");
  }
  if (mech.sensitivity.kind == blendsa::SensitivityKind::None) {
    throw blendsa::ParseError("mechanism '" + mechanism +
                              "' has no sensitivity parameter to vary");
  }
  const std::vector<double> grid = grid_spec.empty()
                                       ? blendsa::default_grid(mech.method)
                                       : blendsa::parse_grid_spec(grid_spec);

  const std::size_t n = grid.size();
  std::vector<double> delta_col(grid), value(n, 0.0), clipped(n, 0.0),
      shift(n, 0.0), status(n, 0.0);
  std::vector<std::uint8_t> value_mask(n, 1), clip_mask(n, 1), shift_mask(n, 0);
  std::size_t n_failed = 0;

  ColumnTable result(n);
  if (mech.method == blendsa::Method::Ipw) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        const blendsa::ConnectingEstimate est =
            blendsa::connecting_quantity(table, cfg.plan, k, grid[i]);
        value[i] = est.value;
        clipped[i] = est.clipped ? 1.0 : 0.0;
      } catch (const blendsa::NumericalError&) {
        value_mask[i] = 0;
        clip_mask[i] = 0;
        status[i] = 1.0;
        ++n_failed;
      }
    }
    result.add_column("delta", continuous_column(
                                   delta_col, std::vector<std::uint8_t>(n, 1)));
    result.add_column("value", continuous_column(value, value_mask));
    Column clip_col = binary_column(clipped);
    clip_col.mask = clip_mask;
    result.add_column("clipped", std::move(clip_col));
  } else {
    const std::string& target = mech.sensitivity.target;
    const bool continuous_target =
        table.column(target).kind == ColumnKind::Continuous;
    // Same seed at every delta: identical draws isolate the shift itself,
    // so a continuous target's mean moves by exactly delta.
    double mean0 = 0.0;
    bool have_mean0 = false;
    try {
      const blendsa::BlendedFit fit0 = blendsa::run_blended(
          table, cfg.plan, {{mechanism, 0.0}}, cfg.M, cfg.seed, cfg.weight_cap);
      mean0 = fit0.diagnostics[k].mean_imputed.at(target);
      have_mean0 = true;
    } catch (const blendsa::NumericalError&) {
      have_mean0 = false;
    }
    for (std::size_t i = 0; i < n; ++i) {
      try {
        const blendsa::BlendedFit fit =
            blendsa::run_blended(table, cfg.plan, {{mechanism, grid[i]}},
                                 cfg.M, cfg.seed, cfg.weight_cap);
        value[i] = fit.diagnostics[k].mean_imputed.at(target);
        if (continuous_target && have_mean0) {
          shift[i] = mean0 + grid[i];
          shift_mask[i] = 1;
        }
      } catch (const blendsa::NumericalError&) {
        value_mask[i] = 0;
        status[i] = 1.0;
        ++n_failed;
      }
    }
    result.add_column("delta", continuous_column(
                                   delta_col, std::vector<std::uint8_t>(n, 1)));
    result.add_column("mean_imputed", continuous_column(value, value_mask));
    result.add_column("exact_shift", continuous_column(shift, shift_mask));
  }
  {
    std::vector<double> ok(n);
    for (std::size_t i = 0; i < n; ++i) ok[i] = status[i] > 0.5 ? 1.0 : 0.0;
    result.add_column("failed", binary_column(ok));
  }
  emit_table(dir, "diagnose", result);
  write_manifest(dir, "diagnose", config_text, cfg.seed);

  if (n_failed == n && n > 0) {
    throw blendsa::NumericalError(
        "every grid point failed for mechanism '" + mechanism + "'");
  }
  if (n_failed > 0) {
    std::cerr << "note: " << n_failed << " of " << n
              << " grid points failed (flagged in the CSV)\n";
    return 4;
  }
  return 0;
}

// --- tipping ----------------------------------------------------------

std::pair<double, double> parse_interval(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos || spec.find(':', colon + 1) != std::string::npos) {
    throw blendsa::ParseError("--interval expects lo:hi, got '" + spec + "'");
  }
  try {
    std::size_t used = 0;
    const double lo = std::stod(spec.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("trailing");
    const std::string hi_text = spec.substr(colon + 1);
    const double hi = std::stod(hi_text, &used);
    if (used != hi_text.size()) throw std::invalid_argument("trailing");
    return {lo, hi};
  } catch (const std::exception&) {
    throw blendsa::ParseError("--interval expects lo:hi, got '" + spec + "'");
  }
}

int cmd_tipping(const RunConfig& cfg, const std::string& mechanism,
                const std::string& coefficient_flag,
                const std::string& interval_spec,
                const std::string& config_text) {
  const std::string dir = out_dir(cfg.out);
  const ColumnTable table = load_dataset(cfg);
  const std::size_t k = mechanism_index(cfg.plan, mechanism);

  const std::string coefficient =
      coefficient_flag.empty() ? cfg.coefficient : coefficient_flag;
  if (coefficient.empty()) {
    throw blendsa::ParseError(
        "tipping needs a coefficient: set /coefficient in the config or pass "
        "--coefficient");
  }
  double lo, hi;
  if (!interval_spec.empty()) {
    std::tie(lo, hi) = parse_interval(interval_spec);
  } else if (cfg.search_interval.size() == 2) {
    lo = cfg.search_interval[0];
    hi = cfg.search_interval[1];
  } else {
    const auto grid = blendsa::default_grid(cfg.plan.mechanisms[k].method);
    lo = grid.front();
    hi = grid.back();
  }

  const blendsa::TippingResult res = blendsa::tipping_point(
      table, cfg.plan, mechanism, coefficient, lo, hi, cfg.B, cfg.M, cfg.alpha,
      cfg.seed, cfg.threads, cfg.weight_cap);

  const std::size_t n = res.probes.size();
  ColumnTable probes(n);
  {
    std::vector<double> delta(n), sig(n);
    for (std::size_t i = 0; i < n; ++i) {
      delta[i] = res.probes[i].first;
      sig[i] = res.probes[i].second ? 1.0 : 0.0;
    }
    probes.add_column("delta", continuous_column(
                                   delta, std::vector<std::uint8_t>(n, 1)));
    probes.add_column("significant", binary_column(sig));
  }
  emit_table(dir, "tipping_probes", probes);

  nlohmann::json j;
  j["found"] = res.found;
  if (res.found) j["delta_star"] = res.delta_star;
  j["significant_at_mar"] = res.significant_at_mar;
  j["coefficient"] = coefficient;
  j["mechanism"] = mechanism;
  j["interval"] = {lo, hi};
  j["n_probes"] = n;
  write_text(dir + "/tipping.json", j.dump(2) + "\n");
  write_manifest(dir, "tipping", config_text, cfg.seed);

  if (res.found) {
    std::cout << "tipping point: delta = " << blendsa::format_value(res.delta_star)
              << " (MAR " << (res.significant_at_mar ? "significant" : "not significant")
              << ")\n";
  } else {
    std::cout << "no tipping point in [" << blendsa::format_value(lo) << ", "
              << blendsa::format_value(hi) << "]\n";
  }
  return 0;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw blendsa::ParseError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blended sensitivity analysis for modularized missing data"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* c_sim = app.add_subcommand(
      "simulate", "generate benchmark data or run the replicated bias study");
  c_sim->add_option("--scenario", sim.scenario, "benchmark scenario (1 or 2)")
      ->check(CLI::Range(1, 2));
  c_sim->add_option("--assignment", sim.assignment,
                    "method letters, e.g. III or IMI");
  c_sim->add_option("--delta-grid", sim.grid_spec,
                    "lo:hi:step grid for the varied mechanism");
  c_sim->add_option("--reps", sim.reps, "Monte Carlo replications");
  c_sim->add_option("--n", sim.n, "sample size per replication");
  c_sim->add_option("--M", sim.M, "imputations per analysis");
  c_sim->add_option("--B", sim.B, "bootstrap size per replication (0 = none)");
  c_sim->add_option("--alpha", sim.alpha, "CI level for coverage");
  c_sim->add_option("--seed", sim.seed, "RNG seed")->required();
  c_sim->add_option("--out", sim.out, "output directory");
  c_sim->add_option("--threads", sim.threads,
                    "worker threads (0 = BLENDSA_THREADS or hardware)");
  c_sim->add_flag("--gen-only", sim.gen_only,
                  "write one generated dataset and stop");
  c_sim->add_flag("--durable", sim.durable,
                  "with --gen-only: five-mechanism cohort-style dataset");
  c_sim->add_option("--gen-delta2", sim.gen_delta2,
                    "with --gen-only: override the generator's Z2 strength");
  c_sim->add_option("--gen-delta3", sim.gen_delta3,
                    "with --gen-only: override the generator's Y strength");

  std::string an_config, an_out;
  int an_threads = -1;
  CLI::App* c_an = app.add_subcommand(
      "analyze", "one blended analysis at fixed sensitivity values");
  c_an->add_option("--config", an_config, "run config JSON")->required();
  c_an->add_option("--out", an_out, "output directory (overrides config)");
  c_an->add_option("--threads", an_threads, "worker threads (overrides config)");

  std::string sw_config, sw_out, sw_coef;
  std::vector<std::string> sw_grids;
  int sw_threads = -1;
  bool sw_full_grid = false, sw_per_cell_ci = false;
  CLI::App* c_sw = app.add_subcommand(
      "sweep", "grid sensitivity analysis; two axes also render an SVG");
  c_sw->add_option("--config", sw_config, "run config JSON")->required();
  c_sw->add_option("--grid", sw_grids,
                   "MECHANISM=lo:hi:step axis (config grids take precedence)");
  c_sw->add_option("--out", sw_out, "output directory (overrides config)");
  c_sw->add_option("--coefficient", sw_coef, "coefficient for the heat map");
  c_sw->add_option("--threads", sw_threads, "worker threads (overrides config)");
  c_sw->add_flag("--full-grid", sw_full_grid, "allow more than two axes");
  c_sw->add_flag("--per-cell-ci", sw_per_cell_ci,
                 "bootstrap a CI in every cell (uses config B)");

  std::string dg_config, dg_mechanism, dg_grid, dg_out;
  int dg_threads = -1;
  CLI::App* c_dg = app.add_subcommand(
      "diagnose", "connecting-quantity or imputed-mean table over a grid");
  c_dg->add_option("--config", dg_config, "run config JSON")->required();
  c_dg->add_option("--mechanism", dg_mechanism, "mechanism name")->required();
  c_dg->add_option("--grid", dg_grid, "lo:hi:step (default by method)");
  c_dg->add_option("--out", dg_out, "output directory (overrides config)");
  c_dg->add_option("--threads", dg_threads, "worker threads (overrides config)");

  std::string tp_config, tp_mechanism, tp_coef, tp_interval, tp_out;
  int tp_threads = -1;
  CLI::App* c_tp = app.add_subcommand(
      "tipping", "smallest |delta| that flips the conclusion");
  c_tp->add_option("--config", tp_config, "run config JSON")->required();
  c_tp->add_option("--mechanism", tp_mechanism, "mechanism name")->required();
  c_tp->add_option("--coefficient", tp_coef,
                   "coefficient to watch (overrides config)");
  c_tp->add_option("--interval", tp_interval,
                   "lo:hi search range (overrides config)");
  c_tp->add_option("--out", tp_out, "output directory (overrides config)");
  c_tp->add_option("--threads", tp_threads, "worker threads (overrides config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(c_sim)) return cmd_simulate(sim);

    auto load = [](const std::string& path, const std::string& out_override,
                   int threads_override, std::string& text_out) {
      text_out = slurp(path);
      RunConfig cfg = blendsa::parse_config_text(text_out);
      if (!out_override.empty()) cfg.out = out_override;
      if (threads_override >= 0) cfg.threads = threads_override;
      return cfg;
    };

    if (app.got_subcommand(c_an)) {
      std::string text;
      const RunConfig cfg = load(an_config, an_out, an_threads, text);
      return cmd_analyze(cfg, text);
    }
    if (app.got_subcommand(c_sw)) {
      std::string text;
      RunConfig cfg = load(sw_config, sw_out, sw_threads, text);
      if (sw_full_grid) cfg.full_grid = true;
      if (sw_per_cell_ci) cfg.per_cell_ci = true;
      if (!sw_coef.empty()) cfg.coefficient = sw_coef;
      return cmd_sweep(cfg, sw_grids, text);
    }
    if (app.got_subcommand(c_dg)) {
      std::string text;
      const RunConfig cfg = load(dg_config, dg_out, dg_threads, text);
      return cmd_diagnose(cfg, dg_mechanism, dg_grid, text);
    }
    if (app.got_subcommand(c_tp)) {
      std::string text;
      const RunConfig cfg = load(tp_config, tp_out, tp_threads, text);
      return cmd_tipping(cfg, tp_mechanism, tp_coef, tp_interval, text);
    }
  } catch (const blendsa::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const blendsa::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
