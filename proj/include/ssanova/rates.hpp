#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ssanova/lattice.hpp"

namespace ssanova {

/** \file  rates.hpp
    \brief Convergence-rate experiments: run an estimator over an n-grid with
           replicates, fit log-log slopes and compare with theory.
*/

enum class EstimatorKind { spectral, kernel };
enum class TargetKind { function, first_partial, mixed_partial };

struct RateTarget {
  TargetKind kind = TargetKind::function;
  int dim = 0;  // zero-based dimension for first_partial
};

struct ExponentResult {
  double exponent = 0.0;   // power of n
  double log_power = 0.0;  // power of log n
};

/// Minimax risk exponents: rate = n^exponent (log n)^log_power.
/// function target, 0 <= p < d:  exponent -2m/(2m+1), log power
///   -(2m/(2m+1)) (1 - min(d-p, r)).  function target, p = d: the dominant of
///   n^-1 (log n)^{r-1} and n^{-2mr/((2m+1)r-2)} (exponents compared first,
///   log powers second).  first_partial: -2(m-1)/(2m-1).  mixed_partial:
///   same shapes with m replaced by m-1 in the numerator.
ExponentResult theoretical_exponent(double m, int d, int r, int p, const RateTarget& target);

enum class LambdaRule { schedule, oracle_grid };

struct RateConfig {
  double m = 2.0;
  int d = 1;
  int r = 1;
  int p = 0;
  EstimatorKind estimator = EstimatorKind::spectral;
  RateTarget target;
  std::vector<long> n_grid;  // strictly increasing, >= 4 entries
  int replicates = 3;
  LambdaRule lambda_rule = LambdaRule::schedule;
  double c = 1.0;                    // schedule constant
  std::vector<double> lambda_grid;   // oracle_grid rule
  std::uint64_t seed = 0;
  double sigma0 = 0.5;
  std::vector<double> sigma;         // sigma_j, j = 1..p (empty = all sigma0)
  int truth_cutoff = 0;              // 0 = default for the dimension
  double extra_decay = 0.05;
  int quad_points = 0;               // 0 = chosen from the frequency content
  double slope_tol = 0.2;
  int threads = 1;
  int series_cutoff = 200;           // kernel estimator
  bool shared_design = true;

  /// test hook: when set, replaces the estimator error for each (n, replicate)
  std::function<double(long, int)> error_hook;
};

struct RateReport {
  struct Cell {
    long n = 0;
    int replicate = 0;
    double error = 0.0;
    double lambda = 0.0;
  };
  std::vector<Cell> cells;                         // ordered by (n, replicate)
  std::vector<std::pair<long, double>> mean_errors;
  double slope = 0.0;
  double slope_stderr = 0.0;
  double theory_exponent = 0.0;
  double theory_log_power = 0.0;
  double tolerance = 0.0;
  bool pass = false;

  std::string to_csv() const;
};

/// Ordinary least squares of log(error) on log(n); returns (slope, stderr).
std::pair<double, double> fit_slope(const std::vector<std::pair<double, double>>& pairs);

/// Deterministic function of the config: truth fixed across the n-grid within
/// a replicate, independent substreams per cell, mean errors aggregated with
/// compensated summation so the result is independent of thread count.
RateReport run_experiment(const RateConfig& config);

} // namespace ssanova
