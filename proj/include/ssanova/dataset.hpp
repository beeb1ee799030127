#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ssanova {

/// Evaluates a scalar field or one of its partial derivatives: mask is a
/// length-d 0/1 vector, all zeros for the field itself, e_j for d/dt_j.
using FieldEvaluator =
    std::function<double(std::span<const double>, std::span<const int>)>;

/// Observations of one channel.  Channel 0 carries function values, channel
/// j >= 1 carries values of the partial derivative along dimension j-1.
struct ChannelData {
  int channel = 0;
  Eigen::MatrixXd points;           // n x d design points in [0,1]^d
  Eigen::VectorXd responses;        // n
  double noise_scale = 0.0;         // sigma_j
  Eigen::VectorXd row_noise_scale;  // per-row sigma override (empty if none)

  long n() const { return points.rows(); }
};

/// Function observations plus p first-partial channels.
struct DerivativeDataset {
  int d = 0;
  int p = 0;
  std::vector<ChannelData> channels;  // ordered, channel j at position j
  std::uint64_t seed = 0;
  std::string truth_hash;             // provenance, may be empty
  bool shared_design = true;

  const ChannelData& channel(int j) const { return channels[static_cast<size_t>(j)]; }

  /// throws std::invalid_argument on inconsistent shape
  void validate() const;
};

std::string serialize(const DerivativeDataset& data);
DerivativeDataset parse_dataset(const std::string& text);

/// One coordinate of a product-form design density on [0,1].
struct CoordinateDensity {
  std::string name;
  std::function<double(double)> pdf;
  std::function<double(double)> cdf;
  std::function<double(double)> inv_cdf;
};

CoordinateDensity uniform_density();

/// pdf(t) = a + 2(1-a) t, bounded away from 0 on [0,1] for a in (0,2)
CoordinateDensity affine_density(double a);

} // namespace ssanova
