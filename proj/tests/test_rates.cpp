#include <doctest.h>

#include <cmath>

#include "ssanova/rates.hpp"

using namespace ssanova;

TEST_CASE("theoretical_exponent: branch values") {
  const RateTarget fn{TargetKind::function, 0};
  const RateTarget dp{TargetKind::first_partial, 0};
  const RateTarget mix{TargetKind::mixed_partial, 0};

  {
    const auto [e, lp] = theoretical_exponent(2.0, 1, 1, 0, fn);
    CHECK(e == doctest::Approx(-0.8).epsilon(1e-14));
    CHECK(lp == doctest::Approx(0.0));
  }
  {
    const auto [e, lp] = theoretical_exponent(2.0, 3, 3, 3, fn);
    CHECK(e == doctest::Approx(-12.0 / 13.0).epsilon(1e-14));
    CHECK(lp == doctest::Approx(0.0));
  }
  {
    const auto [e, lp] = theoretical_exponent(2.0, 2, 1, 1, dp);
    CHECK(e == doctest::Approx(-2.0 / 3.0).epsilon(1e-14));
    CHECK(lp == doctest::Approx(0.0));
  }
  {
    // full interaction, no derivatives: log factor with power (d-1) scaled
    const auto [e, lp] = theoretical_exponent(2.0, 3, 3, 0, fn);
    CHECK(e == doctest::Approx(-0.8).epsilon(1e-14));
    CHECK(lp == doctest::Approx(1.6).epsilon(1e-14));
  }
  {
    const auto [e, lp] = theoretical_exponent(2.0, 2, 2, 0, mix);
    CHECK(e == doctest::Approx(-0.4).epsilon(1e-14));
    CHECK(lp == doctest::Approx(0.4).epsilon(1e-14));
  }
  {
    const auto [e, lp] = theoretical_exponent(3.0, 2, 2, 2, mix);
    CHECK(e == doctest::Approx(-2.0 * 2.0 * 2.0 / (7.0 * 2.0 - 2.0)).epsilon(1e-14));
    CHECK(lp == doctest::Approx(0.0));
  }
}

TEST_CASE("theoretical_exponent: identities across the grid") {
  const RateTarget fn{TargetKind::function, 0};
  for (double m : {2.0, 3.0}) {
    const auto base = theoretical_exponent(m, 1, 1, 0, fn);
    for (int d = 2; d <= 4; ++d) {
      // interaction reduction: full interaction with p = d-1 matches the
      // univariate no-derivative problem
      const auto reduced = theoretical_exponent(m, d, d, d - 1, fn);
      CHECK(reduced.exponent == doctest::Approx(base.exponent).epsilon(1e-14));
      CHECK(reduced.log_power == doctest::Approx(base.log_power).epsilon(1e-14));
    }
    for (int d = 1; d <= 4; ++d) {
      const auto parametric = theoretical_exponent(m, d, 1, d, fn);
      CHECK(parametric.exponent == doctest::Approx(-1.0));
      CHECK(parametric.log_power == doctest::Approx(0.0));
      if (d >= 2) {
        const auto pairwise = theoretical_exponent(m, d, 2, d, fn);
        CHECK(pairwise.exponent == doctest::Approx(-1.0));
        CHECK(pairwise.log_power == doctest::Approx(1.0));
      }
    }
  }
  CHECK_THROWS_AS(theoretical_exponent(2.0, 1, 1, 2, fn), std::invalid_argument);
  CHECK_THROWS_AS(theoretical_exponent(2.0, 1, 2, 0, fn), std::invalid_argument);
  CHECK_THROWS_AS(
      theoretical_exponent(2.0, 2, 1, 0, RateTarget{TargetKind::first_partial, 0}),
      std::invalid_argument);
}

TEST_CASE("fit_slope: exact, constant and perturbed inputs") {
  {
    std::vector<std::pair<double, double>> pairs{
        {100.0, 10.0 / 100.0}, {200.0, 10.0 / 200.0}, {400.0, 10.0 / 400.0}};
    const auto [slope, se] = fit_slope(pairs);
    CHECK(slope == doctest::Approx(-1.0).epsilon(1e-13));
    CHECK(se == doctest::Approx(0.0));
  }
  {
    std::vector<std::pair<double, double>> pairs{
        {100.0, 2.5}, {200.0, 2.5}, {400.0, 2.5}, {800.0, 2.5}};
    const auto [slope, se] = fit_slope(pairs);
    CHECK(std::abs(slope) < 1e-14);
  }
  {
    // +-1% multiplicative wobble moves the slope by well under 0.03
    std::vector<std::pair<double, double>> pairs;
    double sign = 1.0;
    for (double n : {100.0, 200.0, 400.0, 800.0, 1600.0}) {
      pairs.emplace_back(n, std::pow(n, -0.8) * (1.0 + 0.01 * sign));
      sign = -sign;
    }
    const auto [slope, se] = fit_slope(pairs);
    CHECK(std::abs(slope + 0.8) < 0.03);
  }
  CHECK_THROWS_AS(fit_slope({{100.0, 1.0}, {200.0, 0.0}, {400.0, 1.0}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_slope({{100.0, 1.0}, {200.0, 0.5}}), std::invalid_argument);
}

TEST_CASE("run_experiment: injected power law reproduces the slope exactly") {
  RateConfig cfg;
  cfg.m = 2.0;
  cfg.d = 1;
  cfg.r = 1;
  cfg.p = 0;
  cfg.n_grid = {100, 200, 400, 800};
  cfg.replicates = 3;
  cfg.sigma0 = 0.5;
  cfg.seed = 5;
  cfg.slope_tol = 0.05;
  cfg.error_hook = [](long n, int) { return 3.0 * std::pow(static_cast<double>(n), -0.8); };

  const RateReport report = run_experiment(cfg);
  CHECK(std::abs(report.slope + 0.8) < 1e-10);
  CHECK(report.pass);
  CHECK(report.cells.size() == 12);

  const RateReport again = run_experiment(cfg);
  CHECK(again.to_csv() == report.to_csv());
}

TEST_CASE("run_experiment: bias-only regime decreases monotonically") {
  RateConfig cfg;
  cfg.m = 2.0;
  cfg.d = 1;
  cfg.r = 1;
  cfg.p = 0;
  cfg.estimator = EstimatorKind::spectral;
  cfg.n_grid = {8, 16, 32, 64};
  cfg.replicates = 3;
  cfg.sigma0 = 0.0;
  cfg.lambda_rule = LambdaRule::oracle_grid;
  cfg.lambda_grid = {0.0};
  cfg.truth_cutoff = 129;
  cfg.seed = 11;
  cfg.slope_tol = 10.0;

  const RateReport report = run_experiment(cfg);
  for (size_t i = 1; i < report.mean_errors.size(); ++i)
    CHECK(report.mean_errors[i].second <= report.mean_errors[i - 1].second + 1e-12);
  CHECK(report.mean_errors.front().second > 1e-6);  // aliasing bias is visible
}

TEST_CASE("run_experiment: deterministic and thread-count independent") {
  RateConfig cfg;
  cfg.m = 2.0;
  cfg.d = 1;
  cfg.r = 1;
  cfg.p = 1;
  cfg.estimator = EstimatorKind::spectral;
  cfg.target = {TargetKind::first_partial, 0};
  cfg.n_grid = {16, 32, 64, 128};
  cfg.replicates = 4;
  cfg.sigma0 = 0.5;
  cfg.sigma = {0.5};
  cfg.truth_cutoff = 33;
  cfg.seed = 21;

  const RateReport a = run_experiment(cfg);
  RateConfig two = cfg;
  two.threads = 2;
  const RateReport b = run_experiment(two);
  CHECK(a.to_csv() == b.to_csv());
}

TEST_CASE("run_experiment: infeasible lattice sizes are named") {
  RateConfig cfg;
  cfg.m = 2.0;
  cfg.d = 2;
  cfg.r = 1;
  cfg.p = 0;
  cfg.n_grid = {16, 64, 100, 145};
  cfg.replicates = 3;
  cfg.sigma0 = 0.5;
  try {
    run_experiment(cfg);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("145") != std::string::npos);
    CHECK(msg.find("feasible") != std::string::npos);
  }
}

TEST_CASE("run_experiment: kernel estimator path") {
  RateConfig cfg;
  cfg.m = 2.0;
  cfg.d = 1;
  cfg.r = 1;
  cfg.p = 1;
  cfg.estimator = EstimatorKind::kernel;
  cfg.n_grid = {8, 12, 16, 24};
  cfg.replicates = 3;
  cfg.sigma0 = 0.3;
  cfg.sigma = {0.3};
  cfg.truth_cutoff = 17;
  cfg.series_cutoff = 40;
  cfg.quad_points = 96;
  cfg.seed = 2;
  cfg.slope_tol = 10.0;  // structure check only at these sizes

  const RateReport report = run_experiment(cfg);
  CHECK(report.cells.size() == 12);
  for (const auto& cell : report.cells) {
    CHECK(cell.error > 0.0);
    CHECK(cell.lambda > 0.0);
  }
  const std::string csv = report.to_csv();
  CHECK(csv.find("slope,") != std::string::npos);
  CHECK(csv.find("pass,") != std::string::npos);
}
