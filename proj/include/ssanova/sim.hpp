#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ssanova/basis.hpp"
#include "ssanova/dataset.hpp"

namespace ssanova {

/** \file  sim.hpp
    \brief Ground-truth generation, noisy data synthesis, design sampling and
           quadrature error metrics.
*/

/// Recipe for a ground truth inside the model class.  With an empty
/// fixed_coeffs list the coefficients follow the seeded decay law
/// theta = sign * prod_{k active} k^-(m + 1/2 + extra_decay), which keeps the
/// roughness functional finite but close to the boundary of the class.
struct TruthSpec {
  int d = 1;
  int r = 1;
  double m = 2.0;
  int cutoff = 1;            // odd linear-index cutoff
  double extra_decay = 0.05;
  std::vector<std::pair<MultiIndex, double>> fixed_coeffs;
};

/// A sampled truth: a finite coefficient series with evaluators.
struct Truth {
  int d = 1;
  double m = 2.0;
  std::vector<MultiIndex> indices;
  Eigen::VectorXd coeffs;

  double operator()(std::span<const double> t, std::span<const int> deriv_mask) const;
  double penalty_functional() const;  // sum of penalty_weight * theta^2
  std::string hash() const;           // stable content hash for provenance
};

Truth sample_truth(const TruthSpec& spec, std::uint64_t seed);

std::string serialize(const Truth& truth);
Truth parse_truth(const std::string& text);

struct LatticeKind {
  std::vector<int> resolutions;
};
struct IidUniformKind {
  long n = 0;
};
struct IidDensityKind {
  long n = 0;
  // densities[j][k]: coordinate k of channel j's design distribution
  std::vector<std::vector<CoordinateDensity>> densities;
};
using DesignKind = std::variant<LatticeKind, IidUniformKind, IidDensityKind>;

/// Draws designs and synthesizes noisy responses: channel 0 observes the
/// function, channel j observes the partial along dimension j-1, each with
/// additive centered Gaussian noise of scale sigmas[j].  With shared_design
/// one common point set is used for every channel.
DerivativeDataset gen_data(const Truth& truth, const DesignKind& kind, int p,
                           std::span<const double> sigmas, std::uint64_t seed,
                           bool shared_design);

/// Tensor midpoint-rule approximation of the squared L2 distance between two
/// fields (or their masked partial derivatives) over [0,1]^d.
double l2_error(const FieldEvaluator& estimate, const FieldEvaluator& truth,
                std::span<const int> deriv_mask, int d, int quad_points_per_dim);

} // namespace ssanova
