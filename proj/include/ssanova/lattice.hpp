#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ssanova/basis.hpp"
#include "ssanova/dataset.hpp"

namespace ssanova {

/** \file  lattice.hpp
    \brief Regular lattice designs, the discrete coefficient transform of the
           observed channels, the closed-form shrinkage estimator and the
           tuning-parameter schedules.
*/

/// Regular tensor grid with coordinates j/l_k, j = 1..l_k, in row-major
/// order (last dimension cycling fastest).
struct LatticeDesign {
  std::vector<int> resolutions;

  int dim() const { return static_cast<int>(resolutions.size()); }
  long n() const;
  void point_at(long row, std::span<double> out) const;
  Eigen::MatrixXd points() const;
};

LatticeDesign make_lattice(std::vector<int> resolutions);

/// Empirical basis coefficients of one observed channel.  For derivative
/// channels the (cos, sin) pair along the active dimension is swapped and
/// scaled by 1/(2 pi), so that values follow z = k_j * theta + noise with
/// per-coefficient noise sd equal to noise_scale.
struct ChannelCoefficients {
  int channel = 0;
  std::vector<int> resolutions;  // lattice the projection was taken on
  std::vector<MultiIndex> indices;
  Eigen::VectorXd values;
  double noise_scale = 0.0;
};

std::vector<ChannelCoefficients> transform(const DerivativeDataset& data,
                                           const BasisSpec& spec);

/// Model configuration shared by the spectral and kernel estimators.
/// sigma0/sigma are the channel weights of the weighted least-squares loss.
struct FitConfig {
  double m = 2.0;
  int r = 1;
  int d = 1;
  int p = 0;
  double lambda = 0.0;
  double sigma0 = 1.0;
  std::vector<double> sigma;  // sigma_j for channels j = 1..p
};

/// Estimated coefficients on a lattice, with the configuration that
/// produced them.
struct SpectralFit {
  FitConfig config;
  std::vector<int> resolutions;
  std::vector<MultiIndex> indices;
  Eigen::VectorXd coeffs;

  double operator()(std::span<const double> t, std::span<const int> deriv_mask) const;
};

/// Closed-form shrinkage: per coefficient,
///   theta = (z0/sigma0^2 + sum_j k_j z_j/stilde_j^2)
///         / (1/sigma0^2 + sum_j k_j^2/stilde_j^2 + lambda * penalty_weight),
/// with stilde_j^2 = sigma_j^2 / (4 pi^2) matching the transform scaling.
SpectralFit shrink(const std::vector<ChannelCoefficients>& channels, double lambda,
                   const FitConfig& config);

/// Series evaluation of the fit or one of its (possibly mixed) partials.
double evaluate_fit(const SpectralFit& fit, std::span<const double> t,
                    std::span<const int> deriv_mask);

/// Evaluates a coefficient series (or a masked partial) with per-dimension
/// value tables; used by fits and simulated truths alike.
double evaluate_series(const std::vector<MultiIndex>& indices,
                       const Eigen::VectorXd& coeffs, std::span<const double> t,
                       std::span<const int> deriv_mask);

enum class LambdaMode { function, first_partial };

/// Rate-optimal tuning schedules, up to the constant c:
///   function, 0 <= p < d:   c [n (log n)^{1-min(d-p,r)}]^{-2m/(2m+1)}
///   function, p = d, r >= 3: c n^{-(2mr-2)/((2m+1)r-2)}
///   function, p = d, r = 2:  c (n log n)^{-(2m-1)/(2m)}
///   function, p = d, r = 1:  c n^{-(m-1)/m}
///   first_partial:           c n^{-2(m-1)/(2m-1)}
double tune_lambda(long n, double m, int d, int r, int p, LambdaMode mode, double c);

struct LambdaSearchResult {
  double best_lambda = 0.0;
  std::vector<std::pair<double, double>> curve;  // (lambda, quadrature L2 error)
};

/// Oracle grid search: fits at every lambda in the grid and returns the one
/// minimizing quadrature L2 error against the known truth (ties to the
/// smaller lambda).
LambdaSearchResult lambda_grid_search(const DerivativeDataset& data, const BasisSpec& spec,
                                      const FitConfig& config, const FieldEvaluator& truth,
                                      std::span<const double> grid,
                                      int quad_points_per_dim);

std::string serialize(const SpectralFit& fit);
SpectralFit parse_spectral_fit(const std::string& text);

} // namespace ssanova
