#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "ssanova/dataset.hpp"
#include "ssanova/lattice.hpp"

namespace ssanova {

/** \file  kernel.hpp
    \brief Random-design estimator: periodic kernel sections, Gram assembly
           over mixed observation channels, penalized representer solve and
           prediction.
*/

/// Translation-invariant periodic kernel on [0,1],
///   K(s,t) = sum_{k=1..cutoff} 2 k^(-2m) cos(2 pi k (s-t)),
/// with termwise-differentiated first and second derivative sections.
class PeriodicKernel {
public:
  explicit PeriodicKernel(double m, int series_cutoff = 200);

  double m() const { return m_; }
  int series_cutoff() const { return cutoff_; }

  double operator()(double s, double t) const;
  double d_s(double s, double t) const;
  double d_t(double s, double t) const;
  double d_s_d_t(double s, double t) const;

  /// bound on the truncation error of the partial sum: 2 sum_{k>cutoff} k^(-2m)
  double tail_bound() const;

  struct Sections {
    double value;   // k(delta)
    double d1;      // k'(delta)
    double d2;      // k''(delta)
  };
  Sections sections(double delta) const;  // all three in one series pass

private:
  double m_ = 2.0;
  int cutoff_ = 200;
  Eigen::VectorXd coef_;  // 2 k^(-2m)
};

/// Exact closed form of the series for integer m in {1,2,3}, expressed with
/// the even Bernoulli polynomial of the fractional part of s - t.
double bernoulli_kernel_closed_form(int m, double s, double t);

/// Truncated tensor/ANOVA kernel on [0,1]^d: the sum over coordinate subsets
/// of size <= r of products of per-dimension kernels, including the constant
/// (empty subset).  Derivative sections are exact termwise derivatives.
class AnovaKernel {
public:
  AnovaKernel(PeriodicKernel base, int d, int r);

  int dim() const { return d_; }
  int order() const { return r_; }
  const PeriodicKernel& base() const { return base_; }

  double eval(std::span<const double> s, std::span<const double> t) const;
  double d_s(int i, std::span<const double> s, std::span<const double> t) const;
  double d_t(int j, std::span<const double> s, std::span<const double> t) const;
  double d_s_d_t(int i, int j, std::span<const double> s, std::span<const double> t) const;

  /// section addressed by observation channels: a, b in 0..d where 0 selects
  /// evaluation and a >= 1 the partial along dimension a-1, applied to the
  /// first and second argument respectively; with_constant=false drops the
  /// unpenalized constant term (only affects a = b = 0)
  double section(int a, int b, std::span<const double> s, std::span<const double> t,
                 bool with_constant) const;

private:
  PeriodicKernel base_;
  int d_ = 1;
  int r_ = 1;
};

/// Representer-form fit: one coefficient per observation row plus the
/// unpenalized constant.
struct KernelFit {
  FitConfig config;
  int series_cutoff = 200;
  Eigen::MatrixXd points;         // one row per observation, ordered by channel
  std::vector<int> row_channel;   // channel id per row
  Eigen::VectorXd coefficients;
  double null_coeff = 0.0;
  double stationarity_residual = 0.0;
  bool jitter_applied = false;

  double operator()(std::span<const double> t, std::span<const int> deriv_mask) const;
};

/// Gram blocks, per-row weights and responses of the penalized system.
struct GramSystem {
  Eigen::MatrixXd gram;            // penalized kernel sections (constant removed)
  Eigen::VectorXd weights;         // per-row loss weights 1/(n_j (p+1) sigma_j^2)
  Eigen::VectorXd responses;
  Eigen::VectorXd constant_column; // section of the constant per row (1 or 0)
  Eigen::MatrixXd points;
  std::vector<int> row_channel;
};

GramSystem assemble_gram(const DerivativeDataset& data, const FitConfig& config,
                         int series_cutoff);

/// Minimizes the per-channel weighted squared error plus lambda times the
/// squared penalized norm over the representer span.  Throws DegeneracyError
/// when the system is singular at lambda = 0.
KernelFit fit_regularized(const DerivativeDataset& data, double lambda,
                          const FitConfig& config, int series_cutoff = 200);

/// Prediction of the fitted function (mask 0) or one first partial (mask e_j).
/// Mixed partials are not representable by the stored sections.
double predict(const KernelFit& fit, std::span<const double> t,
               std::span<const int> deriv_mask);

/// Maps a dataset with known product-form design densities to uniform
/// designs: coordinates through their CDFs, derivative responses rescaled by
/// the active coordinate's density, per-row noise scales recorded.
DerivativeDataset preprocess_known_density(
    const DerivativeDataset& data,
    const std::vector<std::vector<CoordinateDensity>>& densities);

std::string serialize(const KernelFit& fit);
KernelFit parse_kernel_fit(const std::string& text);

} // namespace ssanova
