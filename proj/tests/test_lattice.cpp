#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ssanova/lattice.hpp"
#include "ssanova/rng.hpp"
#include "ssanova/sim.hpp"

using namespace ssanova;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

DerivativeDataset lattice_dataset_1d(int l, const std::function<double(double)>& f0,
                                     const std::function<double(double)>& f1,
                                     int p) {
  DerivativeDataset data;
  data.d = 1;
  data.p = p;
  for (int j = 0; j <= p; ++j) {
    ChannelData ch;
    ch.channel = j;
    ch.points.resize(l, 1);
    ch.responses.resize(l);
    for (int i = 1; i <= l; ++i) {
      const double t = static_cast<double>(i) / l;
      ch.points(i - 1, 0) = t;
      ch.responses(i - 1) = j == 0 ? f0(t) : f1(t);
    }
    data.channels.push_back(std::move(ch));
  }
  return data;
}

} // namespace

TEST_CASE("make_lattice: examples") {
  {
    const LatticeDesign lat = make_lattice({2});
    const Eigen::MatrixXd pts = lat.points();
    REQUIRE(pts.rows() == 2);
    CHECK(pts(0, 0) == doctest::Approx(0.5));
    CHECK(pts(1, 0) == doctest::Approx(1.0));
  }
  {
    const Eigen::MatrixXd pts = make_lattice({2, 2}).points();
    REQUIRE(pts.rows() == 4);
    CHECK(pts(0, 0) == doctest::Approx(0.5));
    CHECK(pts(0, 1) == doctest::Approx(0.5));
    CHECK(pts(1, 0) == doctest::Approx(0.5));
    CHECK(pts(1, 1) == doctest::Approx(1.0));
    CHECK(pts(2, 0) == doctest::Approx(1.0));
    CHECK(pts(2, 1) == doctest::Approx(0.5));
    CHECK(pts(3, 0) == doctest::Approx(1.0));
    CHECK(pts(3, 1) == doctest::Approx(1.0));
  }
  {
    const Eigen::MatrixXd pts = make_lattice({3, 2}).points();
    REQUIRE(pts.rows() == 6);
    for (long i = 0; i < 6; ++i) {
      const double c = pts(i, 0);
      CHECK((std::abs(c - 1.0 / 3) < 1e-15 || std::abs(c - 2.0 / 3) < 1e-15 ||
             std::abs(c - 1.0) < 1e-15));
    }
  }
  CHECK_THROWS_AS(make_lattice({0}), std::invalid_argument);
  CHECK_THROWS_AS(make_lattice({4, -1}), std::invalid_argument);
}

TEST_CASE("transform: single-mode responses land on single coefficients") {
  const int l = 8;
  const BasisSpec spec(1, 1, 2.0, 9);

  // function channel observing psi_3
  auto data = lattice_dataset_1d(
      l, [](double t) { return psi(3, t); }, nullptr, 0);
  auto channels = transform(data, spec);
  REQUIRE(channels.size() == 1);
  REQUIRE(channels[0].indices.size() == 8);
  for (size_t i = 0; i < channels[0].indices.size(); ++i) {
    const double expect = channels[0].indices[i].values() == std::vector<int>{3} ? 1.0 : 0.0;
    CHECK(std::abs(channels[0].values(static_cast<long>(i)) - expect) < 1e-10);
  }

  // derivative channel observing d psi_3/dt = 2 pi psi_2
  auto data2 = lattice_dataset_1d(
      l, [](double t) { return psi(3, t); },
      [](double t) { return kTwoPi * psi(2, t); }, 1);
  auto channels2 = transform(data2, spec);
  REQUIRE(channels2.size() == 2);
  for (size_t i = 0; i < channels2[1].indices.size(); ++i) {
    const double expect =
        channels2[1].indices[i].values() == std::vector<int>{3} ? 1.0 : 0.0;
    CHECK(std::abs(channels2[1].values(static_cast<long>(i)) - expect) < 1e-10);
  }

  // all-zero responses give all-zero coefficients
  auto data3 = lattice_dataset_1d(
      l, [](double) { return 0.0; }, [](double) { return 0.0; }, 1);
  for (const auto& ch : transform(data3, spec))
    CHECK(ch.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("transform: rejects non-lattice inputs") {
  DerivativeDataset data;
  data.d = 1;
  data.p = 0;
  ChannelData ch;
  ch.channel = 0;
  ch.points.resize(3, 1);
  ch.points << 0.1, 0.5, 0.9;
  ch.responses = Eigen::VectorXd::Zero(3);
  data.channels.push_back(ch);
  CHECK_THROWS_AS(transform(data, BasisSpec(1, 1, 2.0, 3)), std::invalid_argument);
}

TEST_CASE("shrink: identity at lambda 0, worked value, large-lambda limit") {
  const int l = 9;
  Rng rng(3);
  std::vector<double> theta(static_cast<size_t>(l));
  for (double& x : theta)
    x = rng.gaussian();
  auto series = [&theta, l](double t) {
    double s = 0.0;
    for (int nu = 1; nu <= l; ++nu)
      s += theta[static_cast<size_t>(nu - 1)] * psi(nu, t);
    return s;
  };
  auto data = lattice_dataset_1d(l, series, nullptr, 0);
  const auto channels = transform(data, BasisSpec(1, 1, 2.0, 9));

  FitConfig fc;
  fc.m = 2.0;
  fc.d = 1;
  fc.r = 1;
  fc.p = 0;
  fc.sigma0 = 1.0;

  SUBCASE("lambda = 0 reproduces the transformed data") {
    const SpectralFit fit = shrink(channels, 0.0, fc);
    for (long i = 0; i < fit.coeffs.size(); ++i)
      CHECK(fit.coeffs(i) == doctest::Approx(channels[0].values(i)).epsilon(1e-14));
  }

  SUBCASE("large lambda kills penalized coefficients, constant survives") {
    const SpectralFit fit = shrink(channels, 1e12, fc);
    for (size_t i = 0; i < fit.indices.size(); ++i) {
      if (fit.indices[i].interaction_order() == 0)
        CHECK(fit.coeffs(static_cast<long>(i)) ==
              doctest::Approx(channels[0].values(static_cast<long>(i))));
      else
        CHECK(std::abs(fit.coeffs(static_cast<long>(i))) < 1e-9);
    }
  }

  SUBCASE("worked single-coefficient value") {
    ChannelCoefficients c0;
    c0.channel = 0;
    c0.resolutions = {9};
    c0.indices = {MultiIndex({3})};
    c0.values = Eigen::VectorXd::Constant(1, 1.2);
    ChannelCoefficients c1 = c0;
    c1.channel = 1;
    c1.values = Eigen::VectorXd::Constant(1, 0.8);
    FitConfig one;
    one.m = 2.0;
    one.d = 1;
    one.r = 1;
    one.p = 1;
    one.sigma0 = 1.0;
    one.sigma = {kTwoPi};  // scaled-channel variance sigma^2/(4 pi^2) = 1
    const SpectralFit fit = shrink({c0, c1}, 1.0, one);
    CHECK(fit.coeffs(0) == doctest::Approx((1.2 + 0.8) / 3.0).epsilon(1e-14));
  }

  SUBCASE("input validation") {
    CHECK_THROWS_AS(shrink(channels, -1.0, fc), std::invalid_argument);
    FitConfig bad = fc;
    bad.sigma0 = 0.0;
    CHECK_THROWS_AS(shrink(channels, 0.1, bad), std::invalid_argument);
  }
}

TEST_CASE("round trip: noiseless lattice data recovers the truth exactly") {
  struct Case {
    int d, p, l;
  };
  for (const Case cs : {Case{1, 0, 9}, Case{1, 1, 9}, Case{2, 2, 7}}) {
    TruthSpec tspec;
    tspec.d = cs.d;
    tspec.r = cs.d;
    tspec.m = 2.0;
    tspec.cutoff = cs.l % 2 == 1 ? cs.l : cs.l - 1;
    const Truth truth = sample_truth(tspec, 99);

    std::vector<double> sigmas(static_cast<size_t>(cs.p) + 1, 0.0);
    const DerivativeDataset data =
        gen_data(truth, LatticeKind{std::vector<int>(static_cast<size_t>(cs.d), cs.l)},
                 cs.p, sigmas, 1, true);

    FitConfig fc;
    fc.m = 2.0;
    fc.d = cs.d;
    fc.r = cs.d;
    fc.p = cs.p;
    fc.sigma0 = 1.0;
    fc.sigma.assign(static_cast<size_t>(cs.p), 1.0);

    const BasisSpec spec(cs.d, cs.d, 2.0, tspec.cutoff);
    const SpectralFit fit = shrink(transform(data, spec), 0.0, fc);

    std::map<MultiIndex, double> expect;
    for (size_t i = 0; i < truth.indices.size(); ++i)
      expect[truth.indices[i]] = truth.coeffs(static_cast<long>(i));
    for (size_t i = 0; i < fit.indices.size(); ++i) {
      const auto it = expect.find(fit.indices[i]);
      const double target = it == expect.end() ? 0.0 : it->second;
      CHECK(std::abs(fit.coeffs(static_cast<long>(i)) - target) < 1e-8);
    }
  }
}

TEST_CASE("shrink: monotone in lambda, constant invariant, objective optimal") {
  const int l = 9;
  Rng rng(17);
  auto data = lattice_dataset_1d(
      l, [&rng](double) { return rng.gaussian(); },
      [&rng](double) { return rng.gaussian(); }, 1);
  const auto channels = transform(data, BasisSpec(1, 1, 2.0, 9));

  FitConfig fc;
  fc.m = 2.0;
  fc.d = 1;
  fc.r = 1;
  fc.p = 1;
  fc.sigma0 = 0.7;
  fc.sigma = {1.3};

  const double lambdas[] = {0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0};
  SpectralFit prev = shrink(channels, lambdas[0], fc);
  for (size_t li = 1; li < std::size(lambdas); ++li) {
    const SpectralFit cur = shrink(channels, lambdas[li], fc);
    for (size_t i = 0; i < cur.indices.size(); ++i) {
      if (cur.indices[i].interaction_order() == 0)
        CHECK(cur.coeffs(static_cast<long>(i)) ==
              doctest::Approx(prev.coeffs(static_cast<long>(i))).epsilon(1e-14));
      else
        CHECK(std::abs(cur.coeffs(static_cast<long>(i))) <=
              std::abs(prev.coeffs(static_cast<long>(i))) + 1e-15);
    }
    prev = cur;
  }

  // numerator bound: |theta| <= sigma0^2 |numerator|
  const double lambda = 0.05;
  const SpectralFit fit = shrink(channels, lambda, fc);
  const double inv_s0 = 1.0 / (fc.sigma0 * fc.sigma0);
  const double inv_st = kTwoPi * kTwoPi / (fc.sigma[0] * fc.sigma[0]);
  for (size_t i = 0; i < fit.indices.size(); ++i) {
    const double kj = fit.indices[i].frequency(0);
    const double num = inv_s0 * channels[0].values(static_cast<long>(i)) +
                       inv_st * kj * channels[1].values(static_cast<long>(i));
    CHECK(std::abs(fit.coeffs(static_cast<long>(i))) <= std::abs(num) / inv_s0 + 1e-15);
  }

  // random perturbations strictly increase the transformed objective
  auto objective = [&](const Eigen::VectorXd& theta) {
    double obj = 0.0;
    for (size_t i = 0; i < fit.indices.size(); ++i) {
      const long li = static_cast<long>(i);
      const double kj = fit.indices[i].frequency(0);
      const double r0 = channels[0].values(li) - theta(li);
      const double r1 = channels[1].values(li) - kj * theta(li);
      obj += inv_s0 * r0 * r0 + inv_st * r1 * r1 +
             lambda * penalty_weight(fit.indices[i], fc.m) * theta(li) * theta(li);
    }
    return obj;
  };
  const double at_fit = objective(fit.coeffs);
  for (int trial = 0; trial < 30; ++trial) {
    Eigen::VectorXd g(fit.coeffs.size());
    for (long i = 0; i < g.size(); ++i)
      g(i) = rng.gaussian();
    g *= 1e-3 * fit.coeffs.norm() / g.norm();
    CHECK(objective(fit.coeffs + g) > at_fit);
  }

  // the per-coefficient denominator grows with every added channel
  for (size_t i = 0; i < fit.indices.size(); ++i) {
    const double kj = fit.indices[i].frequency(0);
    const double w = penalty_weight(fit.indices[i], fc.m);
    const double den_p0 = inv_s0 + lambda * w;
    const double den_p1 = den_p0 + inv_st * kj * kj;
    CHECK(den_p1 >= den_p0);
  }
}

TEST_CASE("evaluate_fit: values and finite differences") {
  SpectralFit fit;
  fit.config.d = 1;
  fit.config.m = 2.0;
  fit.indices = {MultiIndex({2})};
  fit.coeffs = Eigen::VectorXd::Constant(1, 1.0);

  const double t0[] = {0.0};
  const int m0[] = {0};
  const int m1[] = {1};
  CHECK(evaluate_fit(fit, t0, m0) == doctest::Approx(std::sqrt(2.0)));
  CHECK(evaluate_fit(fit, t0, m1) == doctest::Approx(0.0));

  // random sparse fit: masked evaluation matches finite differences
  Rng rng(23);
  SpectralFit sparse;
  sparse.config.d = 2;
  sparse.config.m = 2.0;
  for (const MultiIndex& nu : enumerate_indices(BasisSpec(2, 2, 2.0, 7)))
    if (rng.uniform() < 0.2)
      sparse.indices.push_back(nu);
  REQUIRE(!sparse.indices.empty());
  sparse.coeffs.resize(static_cast<long>(sparse.indices.size()));
  for (long i = 0; i < sparse.coeffs.size(); ++i)
    sparse.coeffs(i) = rng.gaussian();

  for (int trial = 0; trial < 40; ++trial) {
    const double t[] = {rng.uniform(), rng.uniform()};
    const int mask[] = {1, 0};
    const int none[] = {0, 0};
    const double h = 1e-6;
    const double tp[] = {t[0] + h, t[1]};
    const double tm[] = {t[0] - h, t[1]};
    const double fd =
        (evaluate_fit(sparse, tp, none) - evaluate_fit(sparse, tm, none)) / (2 * h);
    CHECK(std::abs(evaluate_fit(sparse, t, mask) - fd) < 1e-5);
  }

  // all-ones mask evaluates the mixed partial
  SpectralFit cross;
  cross.config.d = 2;
  cross.config.m = 2.0;
  cross.indices = {MultiIndex({2, 3})};
  cross.coeffs = Eigen::VectorXd::Constant(1, 0.7);
  for (int trial = 0; trial < 20; ++trial) {
    const double t[] = {rng.uniform(), rng.uniform()};
    const int both[] = {1, 1};
    const double expect = 0.7 * psi_deriv(2, t[0]) * psi_deriv(3, t[1]);
    CHECK(evaluate_fit(cross, t, both) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("tune_lambda: schedule values") {
  CHECK(tune_lambda(1000, 2.0, 1, 1, 0, LambdaMode::function, 1.0) ==
        doctest::Approx(std::pow(1000.0, -0.8)).epsilon(1e-12));
  CHECK(tune_lambda(1000, 2.0, 1, 1, 1, LambdaMode::function, 1.0) ==
        doctest::Approx(std::pow(1000.0, -0.5)).epsilon(1e-12));
  CHECK(tune_lambda(1000, 2.0, 3, 1, 3, LambdaMode::function, 1.0) ==
        doctest::Approx(std::pow(1000.0, -0.5)).epsilon(1e-12));
  CHECK(tune_lambda(1000, 2.0, 1, 1, 0, LambdaMode::first_partial, 1.0) ==
        doctest::Approx(1e-2).epsilon(1e-12));
  // p = d branches
  CHECK(tune_lambda(1000, 2.0, 3, 3, 3, LambdaMode::function, 1.0) ==
        doctest::Approx(std::pow(1000.0, -10.0 / 13.0)).epsilon(1e-12));
  CHECK(tune_lambda(1000, 2.0, 2, 2, 2, LambdaMode::function, 1.0) ==
        doctest::Approx(std::pow(1000.0 * std::log(1000.0), -0.75)).epsilon(1e-12));
  // p < d with a log factor
  const double base = 1000.0 * std::pow(std::log(1000.0), 1 - 2);
  CHECK(tune_lambda(1000, 2.0, 3, 2, 1, LambdaMode::function, 2.0) ==
        doctest::Approx(2.0 * std::pow(base, -0.8)).epsilon(1e-12));
  CHECK_THROWS_AS(tune_lambda(1000, 2.0, 1, 1, 2, LambdaMode::function, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(tune_lambda(1000, 2.0, 1, 2, 0, LambdaMode::function, 1.0),
                  std::invalid_argument);
}

TEST_CASE("lambda_grid_search: singleton, noiseless zero, exhaustive agreement") {
  TruthSpec tspec;
  tspec.d = 1;
  tspec.r = 1;
  tspec.m = 2.0;
  tspec.cutoff = 9;
  const Truth truth = sample_truth(tspec, 5);
  const FieldEvaluator truth_eval = [&truth](std::span<const double> t,
                                             std::span<const int> mk) {
    return truth(t, mk);
  };

  FitConfig fc;
  fc.m = 2.0;
  fc.d = 1;
  fc.r = 1;
  fc.p = 0;
  fc.sigma0 = 0.5;
  const BasisSpec spec(1, 1, 2.0, 9);

  SUBCASE("singleton grid") {
    const std::vector<double> sigmas{0.5};
    const DerivativeDataset data =
        gen_data(truth, LatticeKind{{16}}, 0, sigmas, 2, true);
    const double grid[] = {0.037};
    const auto res = lambda_grid_search(data, spec, fc, truth_eval, grid, 64);
    CHECK(res.best_lambda == 0.037);
    REQUIRE(res.curve.size() == 1);
  }

  SUBCASE("noiseless data prefers zero") {
    const std::vector<double> sigmas{0.0};
    const DerivativeDataset data =
        gen_data(truth, LatticeKind{{16}}, 0, sigmas, 2, true);
    const double grid[] = {0.0, 1e-3, 1e-2, 1e-1};
    const auto res = lambda_grid_search(data, spec, fc, truth_eval, grid, 64);
    CHECK(res.best_lambda == 0.0);
  }

  SUBCASE("interior minimum matches exhaustive evaluation") {
    const std::vector<double> sigmas{0.5};
    const DerivativeDataset data =
        gen_data(truth, LatticeKind{{64}}, 0, sigmas, 7, true);
    std::vector<double> grid;
    for (int i = 0; i < 10; ++i)
      grid.push_back(1e-5 * std::pow(10.0, i * 0.5));
    const auto res = lambda_grid_search(data, spec, fc, truth_eval, grid, 160);
    double best = std::numeric_limits<double>::infinity();
    double best_lambda = grid[0];
    for (const auto& [lam, err] : res.curve)
      if (err < best) {
        best = err;
        best_lambda = lam;
      }
    CHECK(res.best_lambda == best_lambda);
    // convex-shaped curve with an interior minimizer
    CHECK(best_lambda > grid.front());
    CHECK(best_lambda < grid.back());
  }

  SUBCASE("empty grid rejected") {
    const std::vector<double> sigmas{0.5};
    const DerivativeDataset data =
        gen_data(truth, LatticeKind{{16}}, 0, sigmas, 2, true);
    CHECK_THROWS_AS(
        lambda_grid_search(data, spec, fc, truth_eval, std::span<const double>{}, 64),
        std::invalid_argument);
  }
}

TEST_CASE("spectral fit serialization round trip") {
  TruthSpec tspec;
  tspec.d = 2;
  tspec.r = 2;
  tspec.m = 2.0;
  tspec.cutoff = 5;
  const Truth truth = sample_truth(tspec, 3);
  const std::vector<double> sigmas{0.3, 0.3, 0.3};
  const DerivativeDataset data = gen_data(truth, LatticeKind{{6, 6}}, 2, sigmas, 11, true);

  FitConfig fc;
  fc.m = 2.0;
  fc.d = 2;
  fc.r = 2;
  fc.p = 2;
  fc.sigma0 = 0.3;
  fc.sigma = {0.3, 0.3};
  const SpectralFit fit = shrink(transform(data, BasisSpec(2, 2, 2.0, 7)), 1e-3, fc);

  const std::string text = serialize(fit);
  const SpectralFit back = parse_spectral_fit(text);
  REQUIRE(back.indices.size() == fit.indices.size());
  for (size_t i = 0; i < fit.indices.size(); ++i) {
    CHECK(back.indices[i] == fit.indices[i]);
    CHECK(back.coeffs(static_cast<long>(i)) == fit.coeffs(static_cast<long>(i)));
  }
  CHECK(serialize(back) == text);
}
