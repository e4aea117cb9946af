#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "blendsa/cox.hpp"
#include "blendsa/error.hpp"
#include "blendsa/rng.hpp"
#include "util.hpp"

using namespace blendsa;
using testutil::rnorm;
using testutil::runif;

namespace {

// Breslow partial-likelihood score, computed from scratch.
Eigen::VectorXd breslow_score(const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& time,
                              const Eigen::VectorXd& event,
                              const Eigen::VectorXd& beta) {
  const Eigen::Index n = X.rows(), p = X.cols();
  Eigen::VectorXd score = Eigen::VectorXd::Zero(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (event(i) != 1.0) continue;
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (time(j) < time(i)) continue;
      const double e = std::exp(X.row(j).dot(beta));
      s0 += e;
      s1 += e * X.row(j).transpose();
    }
    score += X.row(i).transpose() - s1 / s0;
  }
  return score;
}

// Breslow baseline cumulative hazard at the unique event times.
std::vector<double> breslow_hazard(const Eigen::MatrixXd& X,
                                   const Eigen::VectorXd& time,
                                   const Eigen::VectorXd& event,
                                   const Eigen::VectorXd& beta,
                                   std::vector<double>* times_out) {
  std::vector<double> ts;
  for (Eigen::Index i = 0; i < time.size(); ++i) {
    if (event(i) == 1.0) ts.push_back(time(i));
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  std::vector<double> H;
  double acc = 0.0;
  for (double t : ts) {
    double d = 0.0, s0 = 0.0;
    for (Eigen::Index j = 0; j < time.size(); ++j) {
      if (time(j) == t && event(j) == 1.0) d += 1.0;
      if (time(j) >= t) s0 += std::exp(X.row(j).dot(beta));
    }
    acc += d / s0;
    H.push_back(acc);
  }
  if (times_out) *times_out = ts;
  return H;
}

struct SurvSample {
  Eigen::MatrixXd X;
  Eigen::VectorXd time, event;
};

SurvSample random_sample(Rng& rng, std::size_t n, std::size_t p,
                         bool with_ties) {
  SurvSample s;
  s.X.resize(n, p);
  s.time.resize(n);
  s.event.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      s.X(i, j) = j % 2 == 0 ? (runif(rng) < 0.5 ? 0.0 : 1.0) : rnorm(rng);
    }
    const double rate = std::exp(0.4 * s.X.row(i).sum());
    double t = -std::log(1.0 - runif(rng)) / rate;
    if (with_ties) t = std::ceil(t * 8.0) / 8.0;  // grid times force ties
    s.time(i) = std::max(t, 1e-3);
    s.event(i) = runif(rng) < 0.75 ? 1.0 : 0.0;
  }
  return s;
}

}  // namespace

TEST_SUITE("survival") {

TEST_CASE("fit_cox zeroes the Breslow score on random instances") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    SurvSample s = random_sample(rng, 80, 1 + rep % 3, rep % 2 == 1);
    CoxFit fit = fit_cox(s.X, s.time, s.event);
    REQUIRE(fit.converged);
    Eigen::VectorXd score =
        breslow_score(s.X, s.time, s.event, fit.coefficients);
    CHECK(score.cwiseAbs().maxCoeff() / double(s.X.rows()) < 1e-7);
  }
}

TEST_CASE("fit_cox matches a one-dimensional bisection oracle") {
  Rng rng(22);
  for (int rep = 0; rep < 20; ++rep) {
    SurvSample s = random_sample(rng, 60, 1, rep % 2 == 0);
    CoxFit fit = fit_cox(s.X, s.time, s.event);

    auto u = [&](double b) {
      Eigen::VectorXd beta(1);
      beta << b;
      return breslow_score(s.X, s.time, s.event, beta)(0);
    };
    double lo = -8.0, hi = 8.0;
    REQUIRE(u(lo) * u(hi) < 0.0);
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (u(lo) * u(mid) <= 0.0 ? hi : lo) = mid;
    }
    CHECK(fit.coefficients(0) == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-6));
  }
}

TEST_CASE("null-model baseline is the Nelson-Aalen estimator") {
  // Hand-checked: times 1,1,2,3,4 with a censoring at 2 and a tie at 1.
  Eigen::MatrixXd X(5, 0);
  Eigen::VectorXd time(5), event(5);
  time << 1, 1, 2, 3, 4;
  event << 1, 1, 0, 1, 1;
  CoxFit fit = fit_cox(X, time, event);
  REQUIRE(fit.event_times.size() == 3);
  CHECK(fit.event_times[0] == 1.0);
  CHECK(fit.event_times[1] == 3.0);
  CHECK(fit.event_times[2] == 4.0);
  CHECK(fit.cum_hazard[0] == doctest::Approx(2.0 / 5.0).epsilon(1e-12));
  CHECK(fit.cum_hazard[1] == doctest::Approx(2.0 / 5.0 + 1.0 / 2.0).epsilon(1e-12));
  CHECK(fit.cum_hazard[2] ==
        doctest::Approx(2.0 / 5.0 + 1.0 / 2.0 + 1.0 / 1.0).epsilon(1e-12));
}

TEST_CASE("baseline hazard matches an independent Breslow computation") {
  Rng rng(33);
  for (int rep = 0; rep < 10; ++rep) {
    SurvSample s = random_sample(rng, 70, 2, true);
    CoxFit fit = fit_cox(s.X, s.time, s.event);
    std::vector<double> ts;
    std::vector<double> H =
        breslow_hazard(s.X, s.time, s.event, fit.coefficients, &ts);
    REQUIRE(fit.event_times == ts);
    REQUIRE(fit.cum_hazard.size() == H.size());
    for (std::size_t i = 0; i < H.size(); ++i) {
      CHECK(fit.cum_hazard[i] == doctest::Approx(H[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("baseline survival is a right-continuous step function") {
  Eigen::MatrixXd X(4, 0);
  Eigen::VectorXd time(4), event(4);
  time << 1, 2, 3, 4;
  event << 1, 1, 1, 0;
  CoxFit fit = fit_cox(X, time, event);
  CHECK(fit.baseline_survival(0.0) == 1.0);
  CHECK(fit.baseline_survival(0.5) == 1.0);
  const double s1 = fit.baseline_survival(1.0);
  CHECK(s1 == doctest::Approx(std::exp(-0.25)).epsilon(1e-12));
  CHECK(fit.baseline_survival(1.5) == s1);  // flat between events
  CHECK(fit.baseline_survival(2.0) < s1);
}

TEST_CASE("enrollment weights invert predicted survival") {
  Rng rng(44);
  SurvSample s = random_sample(rng, 90, 2, false);
  CoxFit fit = fit_cox(s.X, s.time, s.event);
  const double h = 0.4;
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd x = s.X.row(i);
    const double w = enrollment_weight(fit, x, h);
    double H = 0.0;
    for (std::size_t k = 0; k < fit.event_times.size(); ++k) {
      if (fit.event_times[k] <= h) H = fit.cum_hazard[k];
    }
    const double manual = std::exp(H * std::exp(x.dot(fit.coefficients)));
    CHECK(w == doctest::Approx(manual).epsilon(1e-10));
    CHECK(w >= 1.0);
  }
  CHECK_THROWS_AS(enrollment_weight(fit, Eigen::VectorXd(s.X.row(0)), -1.0),
                  Error);
  CHECK_THROWS_AS(
      enrollment_weight(fit, Eigen::VectorXd(s.X.row(0)), fit.max_time + 1.0),
      Error);
}

TEST_CASE("fit_cox input validation") {
  Eigen::MatrixXd X(3, 1);
  X << 0, 1, 0;
  Eigen::VectorXd time(3), event(3);
  time << 1, 2, 3;
  event << 0, 0, 0;
  CHECK_THROWS_AS(fit_cox(X, time, event), NumericalError);  // no events

  event << 1, 1, 2;
  CHECK_THROWS_AS(fit_cox(X, time, event), Error);  // bad event code

  event << 1, 1, 0;
  time << 1, -2, 3;
  CHECK_THROWS_AS(fit_cox(X, time, event), Error);  // negative time
}

TEST_CASE("censored rows enter risk sets but contribute no events") {
  // Censoring at a late time must change nothing before it.
  Eigen::MatrixXd X(4, 0);
  Eigen::VectorXd time(4), event(4);
  time << 1, 2, 3, 10;
  event << 1, 1, 1, 0;
  CoxFit a = fit_cox(X, time, event);

  Eigen::VectorXd time2(4), event2(4);
  time2 << 1, 2, 3, 11;
  event2 << 1, 1, 1, 0;
  CoxFit b = fit_cox(X, time2, event2);
  REQUIRE(a.cum_hazard.size() == b.cum_hazard.size());
  for (std::size_t i = 0; i < a.cum_hazard.size(); ++i) {
    CHECK(a.cum_hazard[i] == b.cum_hazard[i]);
  }
}

}  // TEST_SUITE
