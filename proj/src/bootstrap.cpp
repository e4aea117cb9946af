#include "blendsa/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "blendsa/error.hpp"
#include "blendsa/parallel.hpp"
#include "blendsa/rng.hpp"

namespace blendsa {

std::pair<double, double> percentile_interval(std::vector<double> values,
                                              double alpha) {
  if (values.empty())
    throw NumericalError("percentile interval of an empty sample");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ParseError("alpha must lie strictly between 0 and 1");
  std::sort(values.begin(), values.end());
  const double B = static_cast<double>(values.size());
  auto rank = [&](double q) {
    std::size_t r = static_cast<std::size_t>(std::ceil(B * q));
    if (r < 1) r = 1;
    if (r > values.size()) r = values.size();
    return values[r - 1];
  };
  return {rank(alpha / 2.0), rank(1.0 - alpha / 2.0)};
}

BootstrapResult bootstrap_mi(const ColumnTable& table, const AnalysisPlan& plan,
                             const DeltaMap& delta, std::size_t B,
                             std::size_t M, double alpha, std::uint64_t seed,
                             int threads, double weight_cap) {
  if (B < 1) throw ParseError("bootstrap needs B >= 1 replicates");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ParseError("alpha must lie strictly between 0 and 1");
  const std::size_t n = table.n_rows();
  if (n == 0) throw ParseError("bootstrap of an empty table");

  BootstrapResult out;
  out.B = B;
  out.M = M;
  out.alpha = alpha;
  out.seed = seed;

  BlendedFit base = run_blended(table, plan, delta, M, seed, weight_cap);
  out.coef_names = base.coef_names;
  out.point = base.theta_hat;
  const Eigen::Index p = base.theta_hat.size();

  // Stream b+1 resamples replicate b; the engine then runs on a stream
  // derived from it, so replicates are independent of execution order.
  std::vector<Eigen::VectorXd> est(B);
  std::vector<char> ok(B, 0);
  parallel_for(B, threads, [&](std::size_t b) {
    const std::uint64_t stream = rng::derive_stream(seed, b + 1);
    Rng resample_rng(stream);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = pick(resample_rng);
    ColumnTable boot = table.subset(rows);
    try {
      BlendedFit fit = run_blended(boot, plan, delta, M,
                                   rng::derive_stream(stream, 1), weight_cap);
      est[b] = fit.theta_hat;
      ok[b] = 1;
    } catch (const NumericalError&) {
      // counted below; more than 5% failing aborts the whole bootstrap
    }
  });

  std::size_t n_ok = 0;
  for (std::size_t b = 0; b < B; ++b)
    if (ok[b]) ++n_ok;
  out.n_failed = B - n_ok;
  if (static_cast<double>(out.n_failed) > 0.05 * static_cast<double>(B))
    throw NumericalError(
        std::to_string(out.n_failed) + " of " + std::to_string(B) +
        " bootstrap replicates failed (over 5%); the sensitivity parameters "
        "may be too extreme for stable fits");

  out.replicate_estimates.resize(static_cast<Eigen::Index>(n_ok), p);
  Eigen::Index r = 0;
  for (std::size_t b = 0; b < B; ++b)
    if (ok[b]) out.replicate_estimates.row(r++) = est[b].transpose();

  out.ci_lower.resize(p);
  out.ci_upper.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    std::vector<double> col(out.replicate_estimates.rows());
    for (Eigen::Index i = 0; i < out.replicate_estimates.rows(); ++i)
      col[static_cast<std::size_t>(i)] = out.replicate_estimates(i, j);
    auto [lo, hi] = percentile_interval(std::move(col), alpha);
    out.ci_lower[j] = lo;
    out.ci_upper[j] = hi;
  }
  return out;
}

}  // namespace blendsa
