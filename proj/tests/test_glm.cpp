#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "blendsa/error.hpp"
#include "blendsa/glm.hpp"
#include "blendsa/rng.hpp"
#include "util.hpp"

using namespace blendsa;
using testutil::rnorm;
using testutil::runif;

namespace {

Eigen::MatrixXd random_design(Rng& rng, std::size_t n, std::size_t p) {
  Eigen::MatrixXd X(n, p);
  X.col(0).setOnes();
  for (std::size_t j = 1; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      X(i, j) = j % 2 == 1 ? rnorm(rng) : (runif(rng) < 0.5 ? 0.0 : 1.0);
    }
  }
  return X;
}

Eigen::VectorXd random_weights(Rng& rng, std::size_t n) {
  Eigen::VectorXd w(n);
  for (std::size_t i = 0; i < n; ++i) w(i) = 0.2 + 2.0 * runif(rng);
  return w;
}

// Multinomial cell probabilities implied by a coefficient vector laid out
// as (J-1) blocks of p in ascending non-baseline level order.
Eigen::VectorXd multinomial_probs(const Eigen::VectorXd& beta,
                                  const Eigen::VectorXd& x, std::size_t J,
                                  std::size_t baseline) {
  const std::size_t p = x.size();
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(J);
  std::size_t block = 0;
  for (std::size_t j = 0; j < J; ++j) {
    if (j == baseline) continue;
    eta(j) = beta.segment(block * p, p).dot(x);
    ++block;
  }
  Eigen::VectorXd e = (eta.array() - eta.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace

TEST_SUITE("glm") {

TEST_CASE("stable_expit is safe and monotone at the extremes") {
  CHECK(stable_expit(0.0) == 0.5);
  CHECK(stable_expit(-800.0) == 0.0);
  CHECK(stable_expit(800.0) == 1.0);
  CHECK(stable_expit(-1e308) == 0.0);
  CHECK(std::isfinite(stable_expit(1e308)));
  CHECK(stable_expit(3.0) == doctest::Approx(1.0 - stable_expit(-3.0)).epsilon(1e-12));
  CHECK(stable_expit(1.0) > stable_expit(0.5));
}

TEST_CASE("check_full_rank names the offending columns") {
  Eigen::MatrixXd X(5, 3);
  X.col(0).setOnes();
  X.col(1) << 1, 2, 3, 4, 5;
  X.col(2) = 2.0 * X.col(1);
  try {
    check_full_rank(X, {"(Intercept)", "a", "b"}, "test design");
    FAIL("expected SingularDesignError");
  } catch (const SingularDesignError& e) {
    // Either member of the collinear pair may be reported as dependent,
    // depending on which one the pivoting kept.
    const std::string msg = e.what();
    CHECK(msg.find("dependent columns:") != std::string::npos);
    CHECK((msg.find("'a'") != std::string::npos ||
           msg.find("'b'") != std::string::npos));
  }
}

TEST_CASE("fit_linear matches an SVD oracle on random instances") {
  Rng rng(101);
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t n = 40 + static_cast<std::size_t>(runif(rng) * 60);
    const std::size_t p = 1 + rep % 4;
    Eigen::MatrixXd X = random_design(rng, n, p);
    Eigen::VectorXd y(n), w = random_weights(rng, n);
    for (std::size_t i = 0; i < n; ++i) y(i) = rnorm(rng) + X.row(i).sum();

    ModelFit fit = fit_linear(X, y, w);
    REQUIRE(fit.converged);

    // Oracle: weighted LS via SVD of W^(1/2) X — a different algorithm.
    Eigen::VectorXd sw = w.array().sqrt();
    Eigen::VectorXd oracle =
        (sw.asDiagonal() * X)
            .jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV)
            .solve((sw.array() * y.array()).matrix());
    CHECK((fit.coefficients - oracle).cwiseAbs().maxCoeff() < 1e-8);

    // Normal-equation residual, computed from scratch.
    Eigen::VectorXd resid = y - X * fit.coefficients;
    Eigen::VectorXd score = X.transpose() * (w.asDiagonal() * resid) / double(n);
    CHECK(score.cwiseAbs().maxCoeff() < 1e-8);

    const double rss = (w.array() * resid.array().square()).sum();
    CHECK(fit.residual_variance ==
          doctest::Approx(rss / double(n - p)).epsilon(1e-10));
    CHECK(fit.df_residual == doctest::Approx(double(n - p)));

    Eigen::MatrixXd cov_oracle =
        fit.residual_variance * (X.transpose() * w.asDiagonal() * X).inverse();
    CHECK((fit.covariance - cov_oracle).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("fit_linear intercept-only recovers the weighted mean") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(4, 1);
  Eigen::VectorXd y(4), w(4);
  y << 1, 2, 3, 10;
  w << 1, 1, 1, 3;
  ModelFit fit = fit_linear(X, y, w);
  CHECK(fit.coefficients(0) == doctest::Approx(36.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("fit_linear rejects singular designs") {
  Eigen::MatrixXd X(6, 2);
  X.col(0).setOnes();
  X.col(1).setOnes();
  Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(6, 0, 5);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(6);
  CHECK_THROWS_AS(fit_linear(X, y, w, {"(Intercept)", "dup"}),
                  SingularDesignError);
}

TEST_CASE("fit_logistic zeroes the weighted score on random instances") {
  Rng rng(202);
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t n = 80 + static_cast<std::size_t>(runif(rng) * 80);
    const std::size_t p = 1 + rep % 3;
    Eigen::MatrixXd X = random_design(rng, n, p);
    Eigen::VectorXd w = random_weights(rng, n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double eta = 0.3 * X.row(i).sum() - 0.4;
      y(i) = runif(rng) < stable_expit(eta) ? 1.0 : 0.0;
    }
    ModelFit fit = fit_logistic(X, y, w);
    REQUIRE(fit.converged);
    Eigen::VectorXd mu(n);
    for (std::size_t i = 0; i < n; ++i) {
      mu(i) = stable_expit(X.row(i).dot(fit.coefficients));
    }
    Eigen::VectorXd score =
        X.transpose() * (w.array() * (y - mu).array()).matrix() / double(n);
    CHECK(score.cwiseAbs().maxCoeff() < 1e-8);
    CHECK(fit.score_norm < 1e-8);
  }
}

TEST_CASE("fit_logistic matches the two-by-two closed form") {
  Rng rng(303);
  int done = 0;
  for (int attempt = 0; attempt < 60 && done < 20; ++attempt) {
    const std::size_t n = 200;
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n), w = Eigen::VectorXd::Ones(n);
    double cnt[2][2] = {{0, 0}, {0, 0}};
    X.col(0).setOnes();
    for (std::size_t i = 0; i < n; ++i) {
      const int x = runif(rng) < 0.5 ? 1 : 0;
      const int yi = runif(rng) < stable_expit(-0.4 + 0.9 * x) ? 1 : 0;
      X(i, 1) = x;
      y(i) = yi;
      cnt[x][yi] += 1.0;
    }
    if (cnt[0][0] < 3 || cnt[0][1] < 3 || cnt[1][0] < 3 || cnt[1][1] < 3) {
      continue;
    }
    ++done;
    ModelFit fit = fit_logistic(X, y, w);
    const double b0 = std::log(cnt[0][1] / cnt[0][0]);
    const double b1 = std::log(cnt[1][1] / cnt[1][0]) - b0;
    CHECK(fit.coefficients(0) == doctest::Approx(b0).epsilon(1e-7));
    CHECK(fit.coefficients(1) == doctest::Approx(b1).epsilon(1e-7));
  }
  CHECK(done == 20);
}

TEST_CASE("fit_logistic integer weights equal row replication") {
  Rng rng(404);
  const std::size_t n = 60;
  Eigen::MatrixXd X = random_design(rng, n, 2);
  Eigen::VectorXd y(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    y(i) = runif(rng) < stable_expit(0.5 * X(i, 1)) ? 1.0 : 0.0;
    w(i) = 1.0 + (i % 3 == 0 ? 1.0 : 0.0);
  }
  ModelFit weighted = fit_logistic(X, y, w);

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n; ++i) {
    rows.push_back(i);
    if (i % 3 == 0) rows.push_back(i);
  }
  Eigen::MatrixXd X2(rows.size(), 2);
  Eigen::VectorXd y2(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    X2.row(r) = X.row(rows[r]);
    y2(r) = y(rows[r]);
  }
  ModelFit replicated =
      fit_logistic(X2, y2, Eigen::VectorXd::Ones(rows.size()));
  CHECK((weighted.coefficients - replicated.coefficients).cwiseAbs().maxCoeff() <
        1e-6);
}

TEST_CASE("fit_logistic detects complete separation") {
  // A narrow margin keeps the score above tolerance until the coefficient
  // bound is crossed, which is the separation signal.
  const std::size_t n = 40;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n), w = Eigen::VectorXd::Ones(n);
  X.col(0).setOnes();
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 1) = i < n / 2 ? -0.2 - 0.002 * i : 0.2 + 0.002 * i;
    y(i) = i < n / 2 ? 0.0 : 1.0;
  }
  CHECK_THROWS_AS(fit_logistic(X, y, w), SeparationError);
}

TEST_CASE("fit_multinomial zeroes every level score on random instances") {
  Rng rng(505);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 150;
    const std::size_t J = 3 + rep % 2;
    const std::size_t baseline = rep % J;
    const std::size_t p = 2;
    Eigen::MatrixXd X = random_design(rng, n, p);
    Eigen::VectorXd w = random_weights(rng, n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Mild separation-free class probabilities.
      Eigen::VectorXd eta(J);
      for (std::size_t j = 0; j < J; ++j) eta(j) = 0.3 * double(j) * X(i, 1);
      Eigen::VectorXd pr = (eta.array() - eta.maxCoeff()).exp();
      pr /= pr.sum();
      double u = runif(rng), acc = 0.0;
      y(i) = double(J - 1);
      for (std::size_t j = 0; j < J; ++j) {
        acc += pr(j);
        if (u < acc) {
          y(i) = double(j);
          break;
        }
      }
    }
    ModelFit fit = fit_multinomial(X, y, w, J, baseline);
    REQUIRE(fit.converged);
    CHECK(fit.n_levels == J);
    CHECK(fit.baseline == baseline);
    REQUIRE(fit.coefficients.size() ==
            static_cast<Eigen::Index>((J - 1) * p));

    std::size_t block = 0;
    for (std::size_t j = 0; j < J; ++j) {
      if (j == baseline) continue;
      Eigen::VectorXd score = Eigen::VectorXd::Zero(p);
      for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd pr =
            multinomial_probs(fit.coefficients, X.row(i), J, baseline);
        const double ind = y(i) == double(j) ? 1.0 : 0.0;
        score += w(i) * (ind - pr(j)) * X.row(i).transpose();
      }
      score /= double(n);
      CHECK(score.cwiseAbs().maxCoeff() < 1e-7);
      ++block;
    }
    (void)block;
  }
}

TEST_CASE("fit_multinomial with two levels reproduces fit_logistic") {
  Rng rng(606);
  const std::size_t n = 120;
  Eigen::MatrixXd X = random_design(rng, n, 2);
  Eigen::VectorXd y(n), w = random_weights(rng, n);
  for (std::size_t i = 0; i < n; ++i) {
    y(i) = runif(rng) < stable_expit(0.2 + 0.7 * X(i, 1)) ? 1.0 : 0.0;
  }
  ModelFit logit = fit_logistic(X, y, w);
  ModelFit multi = fit_multinomial(X, y, w, 2, 0);
  CHECK((logit.coefficients - multi.coefficients).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("fit_multinomial matches count-table closed forms") {
  Rng rng(707);
  const std::size_t n = 600;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n), w = Eigen::VectorXd::Ones(n);
  double cnt[2][3] = {{0, 0, 0}, {0, 0, 0}};
  X.col(0).setOnes();
  for (std::size_t i = 0; i < n; ++i) {
    const int x = runif(rng) < 0.5 ? 1 : 0;
    const double u = runif(rng);
    const int lev = u < 0.4 ? 0 : (u < 0.4 + 0.3 + 0.15 * x ? 1 : 2);
    X(i, 1) = x;
    y(i) = lev;
    cnt[x][lev] += 1.0;
  }
  REQUIRE(cnt[0][0] > 0);
  REQUIRE(cnt[1][0] > 0);
  ModelFit fit = fit_multinomial(X, y, w, 3, 0);
  // Blocks: level 1 then level 2, each (intercept, x).
  for (int lev = 1; lev <= 2; ++lev) {
    const double b0 = std::log(cnt[0][lev] / cnt[0][0]);
    const double b1 = std::log(cnt[1][lev] / cnt[1][0]) - b0;
    CHECK(fit.coefficients(2 * (lev - 1)) == doctest::Approx(b0).epsilon(1e-6));
    CHECK(fit.coefficients(2 * (lev - 1) + 1) ==
          doctest::Approx(b1).epsilon(1e-6));
  }
}

TEST_CASE("posterior_draw is seeded and tracks the fit distribution") {
  Rng rng(808);
  const std::size_t n = 400;
  Eigen::MatrixXd X = random_design(rng, n, 2);
  Eigen::VectorXd y(n), w = Eigen::VectorXd::Ones(n);
  for (std::size_t i = 0; i < n; ++i) y(i) = 1.0 + 0.5 * X(i, 1) + rnorm(rng);
  ModelFit fit = fit_linear(X, y, w);

  Rng a(99), b(99);
  ParameterDraw da = posterior_draw(fit, a);
  ParameterDraw db = posterior_draw(fit, b);
  CHECK(da.coefficients == db.coefficients);
  CHECK(da.residual_sd == db.residual_sd);
  CHECK(da.residual_sd > 0.0);

  ParameterDraw dc = posterior_draw(fit, a);
  CHECK(da.coefficients != dc.coefficients);

  // Monte Carlo moments against the asserted normal posterior.
  const int ndraw = 4000;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(2, 2);
  Rng mc(1234);
  for (int d = 0; d < ndraw; ++d) {
    ParameterDraw dd = posterior_draw(fit, mc);
    mean += dd.coefficients;
    Eigen::VectorXd c = dd.coefficients - fit.coefficients;
    outer += c * c.transpose();
  }
  mean /= double(ndraw);
  outer /= double(ndraw);
  const double se0 = std::sqrt(fit.covariance(0, 0) / double(ndraw));
  const double se1 = std::sqrt(fit.covariance(1, 1) / double(ndraw));
  CHECK(std::abs(mean(0) - fit.coefficients(0)) < 5 * se0);
  CHECK(std::abs(mean(1) - fit.coefficients(1)) < 5 * se1);
  CHECK(outer(0, 0) == doctest::Approx(fit.covariance(0, 0)).epsilon(0.15));
  CHECK(outer(1, 1) == doctest::Approx(fit.covariance(1, 1)).epsilon(0.15));
}

TEST_CASE("logistic posterior draws use the fit covariance") {
  Rng rng(909);
  const std::size_t n = 300;
  Eigen::MatrixXd X = random_design(rng, n, 2);
  Eigen::VectorXd y(n), w = Eigen::VectorXd::Ones(n);
  for (std::size_t i = 0; i < n; ++i) {
    y(i) = runif(rng) < stable_expit(0.3 * X(i, 1)) ? 1.0 : 0.0;
  }
  ModelFit fit = fit_logistic(X, y, w);
  Rng mc(77);
  const int ndraw = 4000;
  double var0 = 0.0;
  for (int d = 0; d < ndraw; ++d) {
    ParameterDraw dd = posterior_draw(fit, mc);
    CHECK(dd.residual_sd == 0.0);  // not a linear fit
    const double c = dd.coefficients(0) - fit.coefficients(0);
    var0 += c * c;
  }
  var0 /= double(ndraw);
  CHECK(var0 == doctest::Approx(fit.covariance(0, 0)).epsilon(0.15));
}

}  // TEST_SUITE
