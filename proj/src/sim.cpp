#include "blendsa/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>

#include "blendsa/bootstrap.hpp"
#include "blendsa/error.hpp"
#include "blendsa/parallel.hpp"
#include "blendsa/rng.hpp"

namespace blendsa {

namespace {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double draw_bernoulli(Rng& gen, double p) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return unif(gen) < p ? 1.0 : 0.0;
}

Column make_column(ColumnKind kind, std::vector<double> values,
                   std::vector<std::uint8_t> mask) {
  Column c;
  c.kind = kind;
  c.values = std::move(values);
  c.mask = std::move(mask);
  return c;
}

Column make_categorical(std::vector<double> values,
                        std::vector<std::uint8_t> mask,
                        std::vector<std::string> levels) {
  Column c;
  c.kind = ColumnKind::Categorical;
  c.values = std::move(values);
  c.mask = std::move(mask);
  c.levels = std::move(levels);
  c.baseline = 0;
  return c;
}

// Compensated (Kahan) accumulator so aggregation order never shows up in
// the report.
struct Kahan {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

}  // namespace

ScenarioData generate_scenario(const ScenarioConfig& config) {
  if (config.n == 0) throw ParseError("scenario generator needs n >= 1");
  const std::size_t n = config.n;
  Rng gen(config.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> norm(0.0, 1.0);

  // Variable-major draws in a fixed order keep the table reproducible.
  std::vector<double> z1(n), x(n), z2(n), y(n), t(n);
  std::vector<double> r1(n), r2(n), r3(n);
  for (std::size_t i = 0; i < n; ++i) z1[i] = draw_bernoulli(gen, expit(-0.5));
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = draw_bernoulli(gen, expit(-0.5 - 0.25 * z1[i]));
  }
  for (std::size_t i = 0; i < n; ++i) {
    z2[i] = draw_bernoulli(
        gen, expit(-1.15 - 0.35 * x[i] + 0.6 * z1[i] + 0.4 * x[i] * z1[i]));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double mu =
        0.45 - 0.45 * x[i] + 1.40 * z2[i] - 1.8 * x[i] * z2[i];
    y[i] = mu + 0.3 * norm(gen);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double shape =
        std::exp(1.25 + 0.5 * x[i] - 0.55 * z1[i] - 0.2 * x[i] * z1[i]);
    const double u = unif(gen);
    t[i] = std::max(std::pow(-std::log1p(-u), 1.0 / shape), 1e-12);
    r1[i] = t[i] > 2.0 / 3.0 ? 1.0 : 0.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double p = expit(1.20 - 0.70 * x[i] + 0.65 * z1[i] -
                           0.55 * x[i] * z1[i] + config.delta2 * z2[i]);
    r2[i] = draw_bernoulli(gen, p) * r1[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double p = expit(0.45 + 0.35 * x[i] - 0.70 * z2[i] -
                           0.65 * x[i] * z2[i] + config.delta3 * y[i]);
    r3[i] = draw_bernoulli(gen, p) * r1[i];
  }

  const std::vector<std::uint8_t> all(n, 1);
  std::vector<std::uint8_t> mask_z2(n), mask_y(n);
  for (std::size_t i = 0; i < n; ++i) {
    mask_z2[i] = r2[i] > 0.5 ? 1 : 0;
    mask_y[i] = r3[i] > 0.5 ? 1 : 0;
  }
  std::vector<double> event(n, 1.0);

  ScenarioData out;
  out.table = ColumnTable(n);
  out.table.add_column("X", make_column(ColumnKind::Binary, x, all));
  out.table.add_column("Z1", make_column(ColumnKind::Binary, z1, all));
  out.table.add_column("Z2", make_column(ColumnKind::Binary, z2, mask_z2));
  out.table.add_column("Y", make_column(ColumnKind::Continuous, y, mask_y));
  out.table.add_column("T", make_column(ColumnKind::Continuous, t, all));
  out.table.add_column("EVENT", make_column(ColumnKind::Binary, event, all));
  out.table.add_column("R1", make_column(ColumnKind::Binary, r1, all));
  out.table.add_column("R2", make_column(ColumnKind::Binary, r2, all));
  out.table.add_column("R3", make_column(ColumnKind::Binary, r3, all));

  out.latent = ColumnTable(n);
  out.latent.add_column("X", make_column(ColumnKind::Binary, x, all));
  out.latent.add_column("Z1", make_column(ColumnKind::Binary, z1, all));
  out.latent.add_column("Z2", make_column(ColumnKind::Binary, z2, all));
  out.latent.add_column("Y", make_column(ColumnKind::Continuous, y, all));
  out.latent.add_column("T", make_column(ColumnKind::Continuous, t, all));
  out.latent.add_column("EVENT", make_column(ColumnKind::Binary, event, all));
  out.latent.add_column("R1", make_column(ColumnKind::Binary, r1, all));
  out.latent.add_column("R2", make_column(ColumnKind::Binary, r2, all));
  out.latent.add_column("R3", make_column(ColumnKind::Binary, r3, all));
  return out;
}

std::pair<double, double> scenario_generation_delta(int scenario) {
  if (scenario == 1) return {0.5, 0.0};
  if (scenario == 2) return {0.0, 0.5};
  throw ParseError("scenario must be 1 or 2");
}

std::string varied_mechanism(int scenario) {
  if (scenario == 1) return "R2";
  if (scenario == 2) return "R3";
  throw ParseError("scenario must be 1 or 2");
}

Eigen::VectorXd true_beta() {
  // Saturated in the four (X, Z1) cells: with p = E[Z2 | X, Z1] and
  // E[Y | X, Z1] = 0.45 - 0.45 X + (1.40 - 1.8 X) p, the cell means give
  // the intercept, X, Z1, and X:Z1 effects below.
  Eigen::VectorXd b(4);
  b << 0.786679, -0.859649, 0.175530, -0.253576;
  return b;
}

Eigen::VectorXd approximate_true_beta(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ParseError("approximate_true_beta needs n >= 1");
  Rng gen(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> norm(0.0, 1.0);
  Eigen::Matrix4d xtx = Eigen::Matrix4d::Zero();
  Eigen::Vector4d xty = Eigen::Vector4d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const double z1 = unif(gen) < expit(-0.5) ? 1.0 : 0.0;
    const double x = unif(gen) < expit(-0.5 - 0.25 * z1) ? 1.0 : 0.0;
    const double z2 =
        unif(gen) < expit(-1.15 - 0.35 * x + 0.6 * z1 + 0.4 * x * z1) ? 1.0
                                                                      : 0.0;
    const double y =
        0.45 - 0.45 * x + 1.40 * z2 - 1.8 * x * z2 + 0.3 * norm(gen);
    Eigen::Vector4d row(1.0, x, z1, x * z1);
    xtx.noalias() += row * row.transpose();
    xty.noalias() += row * y;
  }
  return xtx.ldlt().solve(xty);
}

AnalysisPlan scenario_plan(const std::string& assignment) {
  if (assignment.size() != 3 || assignment[0] != 'I' ||
      (assignment[1] != 'I' && assignment[1] != 'M') ||
      (assignment[2] != 'I' && assignment[2] != 'M')) {
    throw ParseError(
        "assignment must be one of III, IIM, IMI, IMM (enrollment is "
        "always weighted)");
  }
  AnalysisPlan plan;
  {
    SubMechanism m;
    m.name = "R1";
    m.method = Method::CoxIpw;
    m.indicator = "R1";
    m.time = "T";
    m.event = "EVENT";
    m.hazard_model = "~ 0 + X + Z1 + X:Z1";
    m.horizon = 2.0 / 3.0;
    plan.mechanisms.push_back(std::move(m));
  }
  {
    SubMechanism m;
    m.name = "R2";
    m.indicator = "R2";
    m.variables = {"Z2"};
    if (assignment[1] == 'I') {
      m.method = Method::Ipw;
      m.selection_model = "~ X + Z1 + X:Z1";
      m.sensitivity = {SensitivityKind::IpwLinear, "Z2", 1.0};
    } else {
      m.method = Method::Mi;
      ImputationModel im;
      im.variable = "Z2";
      im.formulas = {"Z2 ~ X + Z1 + X:Z1 + Y + X:Y", "Z2 ~ X + Z1 + X:Z1"};
      m.imputation.push_back(std::move(im));
      m.sensitivity = {SensitivityKind::MiShift, "Z2", 1.0};
    }
    plan.mechanisms.push_back(std::move(m));
  }
  {
    SubMechanism m;
    m.name = "R3";
    m.indicator = "R3";
    m.variables = {"Y"};
    if (assignment[2] == 'I') {
      m.method = Method::Ipw;
      m.selection_model = "~ X + Z2 + X:Z2";
      m.sensitivity = {SensitivityKind::IpwLinear, "Y", 1.0};
    } else {
      m.method = Method::Mi;
      ImputationModel im;
      im.variable = "Y";
      im.formulas = {"Y ~ X + Z2 + X:Z2"};
      m.imputation.push_back(std::move(im));
      m.sensitivity = {SensitivityKind::MiShift, "Y", 1.0};
    }
    plan.mechanisms.push_back(std::move(m));
  }
  plan.analysis_model = "Y ~ X + Z1 + X:Z1";
  return plan;
}

BiasReport run_scenario(const ScenarioRun& run) {
  if (run.grid.empty()) throw ParseError("bias study needs a nonempty grid");
  for (double g : run.grid) {
    if (!std::isfinite(g)) throw ParseError("non-finite grid value");
  }
  if (run.n_reps == 0) throw ParseError("bias study needs n_reps >= 1");
  if (run.M == 0) throw ParseError("number of imputations must be at least 1");
  if (!(run.alpha > 0.0 && run.alpha < 1.0)) {
    throw ParseError("alpha must be in (0, 1)");
  }
  const auto [g2, g3] = scenario_generation_delta(run.scenario);
  const std::string mech = varied_mechanism(run.scenario);
  const AnalysisPlan plan = scenario_plan(run.assignment);
  const Eigen::VectorXd reference = true_beta();
  const std::size_t G = run.grid.size();
  const std::size_t R = run.n_reps;
  const auto p_ref = static_cast<std::size_t>(reference.size());

  // Per (replication, grid) storage, aggregated serially afterwards so
  // thread scheduling cannot change the report.
  std::vector<std::vector<Eigen::VectorXd>> est(R,
                                                std::vector<Eigen::VectorXd>(G));
  std::vector<std::vector<std::vector<char>>> cover;
  if (run.B > 0) {
    cover.assign(R, std::vector<std::vector<char>>(G));
  }
  std::vector<std::string> coef_names;
  std::mutex name_mutex;

  parallel_for(R, run.threads, [&](std::size_t r) {
    const std::uint64_t data_seed = rng::derive_stream(run.seed, r);
    ScenarioConfig cfg;
    cfg.n = run.n;
    cfg.delta2 = g2;
    cfg.delta3 = g3;
    cfg.seed = data_seed;
    const ScenarioData data = generate_scenario(cfg);
    for (std::size_t gi = 0; gi < G; ++gi) {
      DeltaMap dm;
      dm[mech] = run.grid[gi];
      const std::vector<double> dvec = delta_vector(plan, dm);
      const std::uint64_t engine_seed = rng::hash_delta(data_seed, dvec);
      try {
        const BlendedFit fit =
            run_blended(data.table, plan, dm, run.M, engine_seed);
        est[r][gi] = fit.theta_hat;
        {
          std::lock_guard<std::mutex> g(name_mutex);
          if (coef_names.empty()) coef_names = fit.coef_names;
        }
        if (run.B > 0) {
          const BootstrapResult br =
              bootstrap_mi(data.table, plan, dm, run.B, run.M, run.alpha,
                           engine_seed, 1);
          std::vector<char> c(p_ref, 0);
          for (std::size_t j = 0; j < p_ref; ++j) {
            const auto ji = static_cast<Eigen::Index>(j);
            c[j] = (br.ci_lower[ji] <= reference[ji] &&
                    reference[ji] <= br.ci_upper[ji])
                       ? 1
                       : 0;
          }
          cover[r][gi] = std::move(c);
        }
      } catch (const NumericalError&) {
        est[r][gi] = Eigen::VectorXd();  // marks a failed cell
      }
    }
  });

  BiasReport report;
  report.scenario = run.scenario;
  report.assignment = run.assignment;
  report.coef_names = coef_names;
  report.reference = reference;
  report.n_reps = R;
  for (std::size_t gi = 0; gi < G; ++gi) {
    BiasCell cell;
    cell.delta = run.grid[gi];
    std::vector<Kahan> sum(p_ref), sumsq(p_ref), csum(p_ref);
    std::size_t n_ok = 0, n_cov = 0;
    for (std::size_t r = 0; r < R; ++r) {
      const Eigen::VectorXd& e = est[r][gi];
      if (e.size() != static_cast<Eigen::Index>(p_ref)) continue;
      ++n_ok;
      for (std::size_t j = 0; j < p_ref; ++j) {
        sum[j].add(e[static_cast<Eigen::Index>(j)]);
        sumsq[j].add(e[static_cast<Eigen::Index>(j)] *
                     e[static_cast<Eigen::Index>(j)]);
      }
      if (run.B > 0 && cover[r][gi].size() == p_ref) {
        ++n_cov;
        for (std::size_t j = 0; j < p_ref; ++j) {
          csum[j].add(cover[r][gi][j]);
        }
      }
    }
    cell.n_ok = n_ok;
    cell.n_failed = R - n_ok;
    cell.mean_estimate.resize(static_cast<Eigen::Index>(p_ref));
    cell.pct_bias.resize(static_cast<Eigen::Index>(p_ref));
    cell.mc_se_pct.resize(static_cast<Eigen::Index>(p_ref));
    if (run.B > 0) cell.coverage.resize(static_cast<Eigen::Index>(p_ref));
    for (std::size_t j = 0; j < p_ref; ++j) {
      const auto ji = static_cast<Eigen::Index>(j);
      if (n_ok == 0) {
        cell.mean_estimate[ji] = std::numeric_limits<double>::quiet_NaN();
        cell.pct_bias[ji] = std::numeric_limits<double>::quiet_NaN();
        cell.mc_se_pct[ji] = std::numeric_limits<double>::quiet_NaN();
        if (run.B > 0) {
          cell.coverage[ji] = std::numeric_limits<double>::quiet_NaN();
        }
        continue;
      }
      const double mean = sum[j].sum / static_cast<double>(n_ok);
      const double var =
          n_ok > 1 ? std::max(0.0, (sumsq[j].sum -
                                    static_cast<double>(n_ok) * mean * mean) /
                                       static_cast<double>(n_ok - 1))
                   : 0.0;
      const double aref = std::abs(reference[ji]);
      cell.mean_estimate[ji] = mean;
      cell.pct_bias[ji] = 100.0 * (mean - reference[ji]) / aref;
      cell.mc_se_pct[ji] =
          100.0 * std::sqrt(var / static_cast<double>(n_ok)) / aref;
      if (run.B > 0) {
        cell.coverage[ji] =
            n_cov > 0
                ? csum[j].sum / static_cast<double>(n_cov)
                : std::numeric_limits<double>::quiet_NaN();
      }
    }
    report.cells.push_back(std::move(cell));
  }
  return report;
}

ColumnTable bias_report_table(const BiasReport& report) {
  const std::size_t p = report.coef_names.size();
  const std::size_t per_cell = std::max<std::size_t>(p, 1);
  const std::size_t n = report.cells.size() * per_cell;
  std::vector<double> delta(n, 0.0), coef(n, 0.0), bias(n, 0.0);
  std::vector<double> mcse(n, 0.0), cov(n, 0.0), ok(n, 0.0), fail(n, 0.0);
  std::vector<std::uint8_t> full(n, 1), m_val(n, 1), m_cov(n, 1);
  std::size_t rix = 0;
  for (const BiasCell& cell : report.cells) {
    for (std::size_t j = 0; j < per_cell; ++j, ++rix) {
      delta[rix] = cell.delta;
      coef[rix] = static_cast<double>(j);
      ok[rix] = static_cast<double>(cell.n_ok);
      fail[rix] = static_cast<double>(cell.n_failed);
      const auto ji = static_cast<Eigen::Index>(j);
      if (p == 0 || cell.n_ok == 0 ||
          cell.pct_bias.size() != static_cast<Eigen::Index>(p)) {
        m_val[rix] = 0;
        m_cov[rix] = 0;
        continue;
      }
      bias[rix] = cell.pct_bias[ji];
      mcse[rix] = cell.mc_se_pct[ji];
      if (cell.coverage.size() == static_cast<Eigen::Index>(p) &&
          std::isfinite(cell.coverage[ji])) {
        cov[rix] = cell.coverage[ji];
      } else {
        m_cov[rix] = 0;
      }
    }
  }
  ColumnTable t(n);
  t.add_column("delta", make_column(ColumnKind::Continuous, std::move(delta),
                                    full));
  std::vector<std::string> levels = report.coef_names;
  if (levels.empty()) levels.push_back("(none)");
  std::vector<std::uint8_t> m_coef(n, p == 0 ? 0 : 1);
  t.add_column("coef", make_categorical(std::move(coef), std::move(m_coef),
                                        std::move(levels)));
  t.add_column("pct_bias",
               make_column(ColumnKind::Continuous, std::move(bias), m_val));
  t.add_column("mc_se", make_column(ColumnKind::Continuous, std::move(mcse),
                                    std::move(m_val)));
  t.add_column("coverage", make_column(ColumnKind::Continuous, std::move(cov),
                                       std::move(m_cov)));
  t.add_column("n_ok",
               make_column(ColumnKind::Continuous, std::move(ok), full));
  t.add_column("n_failed",
               make_column(ColumnKind::Continuous, std::move(fail), full));
  return t;
}

ColumnTable generate_durable_like(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ParseError("durable-like generator needs n >= 1");
  Rng gen(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> norm(0.0, 1.0);

  std::vector<double> rygb(n), age(n), female(n), ckd0(n), ccs0(n), bmi0(n);
  std::vector<double> time(n), event(n), enrolled(n);
  std::vector<double> ckd5(n), ccs5(n), bmi5(n);
  std::vector<double> r1(n), r2(n), r4(n), r5(n);

  for (std::size_t i = 0; i < n; ++i) rygb[i] = draw_bernoulli(gen, 0.55);
  for (std::size_t i = 0; i < n; ++i) age[i] = norm(gen);
  for (std::size_t i = 0; i < n; ++i) female[i] = draw_bernoulli(gen, 0.7);
  for (std::size_t i = 0; i < n; ++i) {
    ckd0[i] =
        draw_bernoulli(gen, expit(-1.2 + 0.5 * age[i] - 0.2 * female[i]));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double e1 = std::exp(-0.4 + 0.3 * age[i] + 0.3 * ckd0[i]);
    const double e2 = std::exp(-1.1 + 0.6 * age[i] + 0.5 * ckd0[i]);
    const double p0 = 1.0 / (1.0 + e1 + e2);
    const double u = unif(gen);
    ccs0[i] = u < p0 ? 0.0 : (u < p0 * (1.0 + e1) ? 1.0 : 2.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = 45.0 + 1.5 * ckd0[i] + 1.0 * (ccs0[i] == 1.0) +
                      2.0 * (ccs0[i] == 2.0) + 0.5 * female[i] -
                      0.3 * age[i];
    bmi0[i] = mu + 5.0 * norm(gen);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double rate = std::exp(-2.0 + 0.3 * rygb[i] - 0.1 * age[i]);
    const double t = -std::log1p(-unif(gen)) / rate;
    time[i] = std::min(t, 6.0);
    event[i] = t <= 6.0 ? 1.0 : 0.0;
    enrolled[i] = t > 4.5 ? 1.0 : 0.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    ckd5[i] = draw_bernoulli(
        gen, expit(-1.5 + 1.2 * ckd0[i] + 0.3 * age[i] - 0.4 * rygb[i]));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double e1 = std::exp(-0.5 + 0.9 * (ccs0[i] == 1.0) +
                               0.6 * (ccs0[i] == 2.0) + 0.3 * age[i] -
                               0.2 * rygb[i]);
    const double e2 = std::exp(-1.3 + 0.5 * (ccs0[i] == 1.0) +
                               1.1 * (ccs0[i] == 2.0) + 0.5 * age[i] -
                               0.3 * rygb[i]);
    const double p0 = 1.0 / (1.0 + e1 + e2);
    const double u = unif(gen);
    ccs5[i] = u < p0 ? 0.0 : (u < p0 * (1.0 + e1) ? 1.0 : 2.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = 38.0 + 0.75 * (bmi0[i] - 45.0) - 3.0 * rygb[i] +
                      1.2 * ckd0[i] + 0.8 * (ccs0[i] == 1.0) +
                      1.5 * (ccs0[i] == 2.0) - 0.2 * age[i] +
                      0.3 * female[i];
    bmi5[i] = mu + 3.0 * norm(gen);
  }
  for (std::size_t i = 0; i < n; ++i) {
    r1[i] = draw_bernoulli(
        gen, expit(1.4 - 0.3 * rygb[i] + 0.2 * age[i] - 0.2 * female[i]));
  }
  for (std::size_t i = 0; i < n; ++i) {
    r2[i] =
        draw_bernoulli(gen, expit(1.2 + 0.25 * rygb[i] - 0.15 * age[i]));
  }
  for (std::size_t i = 0; i < n; ++i) {
    r4[i] = enrolled[i] *
            draw_bernoulli(gen, expit(1.0 - 0.2 * rygb[i] + 0.1 * age[i] +
                                      0.3 * female[i]));
  }
  for (std::size_t i = 0; i < n; ++i) {
    r5[i] = enrolled[i] *
            draw_bernoulli(gen, expit(0.9 + 0.3 * rygb[i] - 0.2 * age[i]));
  }

  const std::vector<std::uint8_t> all(n, 1);
  std::vector<std::uint8_t> m1(n), m2(n), m4(n), m5(n);
  for (std::size_t i = 0; i < n; ++i) {
    m1[i] = r1[i] > 0.5 ? 1 : 0;
    m2[i] = r2[i] > 0.5 ? 1 : 0;
    m4[i] = r4[i] > 0.5 ? 1 : 0;
    m5[i] = r5[i] > 0.5 ? 1 : 0;
  }
  const std::vector<std::string> ccs_levels = {"0", "1-2", "3+"};

  ColumnTable t(n);
  t.add_column("RYGB", make_column(ColumnKind::Binary, rygb, all));
  t.add_column("AGE", make_column(ColumnKind::Continuous, age, all));
  t.add_column("FEMALE", make_column(ColumnKind::Binary, female, all));
  t.add_column("CKD0", make_column(ColumnKind::Binary, ckd0, m1));
  t.add_column("CCS0", make_categorical(ccs0, m1, ccs_levels));
  t.add_column("BMI0", make_column(ColumnKind::Continuous, bmi0, m2));
  t.add_column("TIME", make_column(ColumnKind::Continuous, time, all));
  t.add_column("EVENT", make_column(ColumnKind::Binary, event, all));
  t.add_column("ENROLLED", make_column(ColumnKind::Binary, enrolled, all));
  t.add_column("CKD5", make_column(ColumnKind::Binary, ckd5, m4));
  t.add_column("CCS5", make_categorical(ccs5, m4, ccs_levels));
  t.add_column("BMI5", make_column(ColumnKind::Continuous, bmi5, m5));
  t.add_column("R1", make_column(ColumnKind::Binary, r1, all));
  t.add_column("R2", make_column(ColumnKind::Binary, r2, all));
  t.add_column("R4", make_column(ColumnKind::Binary, r4, all));
  t.add_column("R5", make_column(ColumnKind::Binary, r5, all));
  return t;
}

AnalysisPlan durable_plan(const std::string& assignment) {
  if (assignment != "IMIIM" && assignment != "MIIMI") {
    throw ParseError(
        "durable-like assignment must be \"IMIIM\" or \"MIIMI\"");
  }
  const bool imiim = assignment == "IMIIM";
  AnalysisPlan plan;
  {
    SubMechanism m;
    m.name = "R1";
    m.indicator = "R1";
    m.variables = {"CKD0", "CCS0"};
    if (imiim) {
      m.method = Method::Ipw;
      m.selection_model = "~ RYGB + AGE + FEMALE";
      m.sensitivity = {SensitivityKind::IpwLinear, "CKD0", 1.0};
    } else {
      m.method = Method::Mi;
      ImputationModel a;
      a.variable = "CKD0";
      a.formulas = {"CKD0 ~ RYGB + AGE + FEMALE"};
      ImputationModel b;
      b.variable = "CCS0";
      b.formulas = {"CCS0 ~ RYGB + AGE + FEMALE + CKD0"};
      m.imputation = {std::move(a), std::move(b)};
      m.sensitivity = {SensitivityKind::MiShift, "CKD0", 1.0};
    }
    plan.mechanisms.push_back(std::move(m));
  }
  {
    SubMechanism m;
    m.name = "R2";
    m.indicator = "R2";
    m.variables = {"BMI0"};
    if (imiim) {
      m.method = Method::Mi;
      ImputationModel a;
      a.variable = "BMI0";
      a.formulas = {"BMI0 ~ RYGB + AGE + FEMALE + CKD0 + CCS0"};
      m.imputation = {std::move(a)};
      m.sensitivity = {SensitivityKind::MiShift, "BMI0", 1.0};
    } else {
      m.method = Method::Ipw;
      m.selection_model = "~ RYGB + AGE + FEMALE + CKD0";
      m.sensitivity = {SensitivityKind::IpwLinear, "BMI0", 5.0};
    }
    plan.mechanisms.push_back(std::move(m));
  }
  {
    SubMechanism m;
    m.name = "R3";
    m.method = Method::CoxIpw;
    m.indicator = "ENROLLED";
    m.time = "TIME";
    m.event = "EVENT";
    m.hazard_model = "~ 0 + RYGB + AGE + CKD0 + BMI0";
    m.horizon = 4.5;
    plan.mechanisms.push_back(std::move(m));
  }
  {
    SubMechanism m;
    m.name = "R4";
    m.indicator = "R4";
    m.variables = {"CKD5", "CCS5"};
    if (imiim) {
      m.method = Method::Ipw;
      m.selection_model = "~ RYGB + AGE + CKD0 + BMI0";
      m.sensitivity = {SensitivityKind::IpwLinear, "CKD5", 1.0};
    } else {
      m.method = Method::Mi;
      ImputationModel a;
      a.variable = "CKD5";
      a.formulas = {"CKD5 ~ RYGB + AGE + CKD0 + BMI0"};
      ImputationModel b;
      b.variable = "CCS5";
      b.formulas = {"CCS5 ~ RYGB + AGE + CCS0 + CKD5"};
      m.imputation = {std::move(a), std::move(b)};
      m.sensitivity = {SensitivityKind::MiShift, "CKD5", 1.0};
    }
    plan.mechanisms.push_back(std::move(m));
  }
  {
    SubMechanism m;
    m.name = "R5";
    m.indicator = "R5";
    m.variables = {"BMI5"};
    if (imiim) {
      m.method = Method::Mi;
      ImputationModel a;
      a.variable = "BMI5";
      a.formulas = {
          "BMI5 ~ RYGB + CKD0 + CCS0 + AGE + FEMALE + BMI0 + CKD5"};
      m.imputation = {std::move(a)};
      m.sensitivity = {SensitivityKind::MiShift, "BMI5", 1.0};
    } else {
      m.method = Method::Ipw;
      m.selection_model = "~ RYGB + AGE + CKD0 + BMI0 + CKD5";
      m.sensitivity = {SensitivityKind::IpwLinear, "BMI5", 5.0};
    }
    plan.mechanisms.push_back(std::move(m));
  }
  plan.analysis_model =
      "BMI5 ~ RYGB + CKD0 + RYGB:CKD0 + CCS0 + AGE + FEMALE + BMI0";
  return plan;
}

}  // namespace blendsa
