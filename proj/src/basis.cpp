#include "ssanova/basis.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ssanova {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSqrt2 = std::numbers::sqrt2;
} // namespace

MultiIndex::MultiIndex(std::vector<int> indices) : indices_(std::move(indices)) {
  if (indices_.empty())
    throw std::invalid_argument("MultiIndex: empty index vector");
  for (int nu : indices_)
    if (nu < 1)
      throw std::invalid_argument("MultiIndex: linear indices must be >= 1");
}

int MultiIndex::interaction_order() const {
  int s = 0;
  for (int nu : indices_)
    if (nu >= 2)
      ++s;
  return s;
}

std::vector<int> MultiIndex::support() const {
  std::vector<int> dims;
  for (int k = 0; k < dim(); ++k)
    if (indices_[static_cast<size_t>(k)] >= 2)
      dims.push_back(k);
  return dims;
}

BasisSpec::BasisSpec(int d_, int r_, double m_, int cutoff_)
    : d(d_), r(r_), m(m_), cutoff(cutoff_) {
  if (d < 1)
    throw std::invalid_argument("BasisSpec: d must be >= 1");
  if (r < 1 || r > d)
    throw std::invalid_argument("BasisSpec: need 1 <= r <= d");
  if (!(m > 1.5))
    throw std::invalid_argument("BasisSpec: smoothness order m must exceed 3/2");
  if (cutoff < 1)
    throw std::invalid_argument("BasisSpec: cutoff must be >= 1");
  if (cutoff % 2 == 0)
    throw std::invalid_argument("BasisSpec: cutoff must be odd (2K+1 for max frequency K)");
}

std::vector<MultiIndex> enumerate_indices(const BasisSpec& spec) {
  std::vector<int> caps(static_cast<size_t>(spec.d), spec.cutoff);
  return enumerate_indices(caps, spec.r);
}

std::vector<MultiIndex> enumerate_indices(std::span<const int> caps, int r) {
  const int d = static_cast<int>(caps.size());
  if (d < 1)
    throw std::invalid_argument("enumerate_indices: empty cap vector");
  for (int c : caps)
    if (c < 1)
      throw std::invalid_argument("enumerate_indices: caps must be >= 1");
  if (r < 1 || r > d)
    throw std::invalid_argument("enumerate_indices: need 1 <= r <= d");

  std::vector<MultiIndex> out;
  std::vector<int> nu(static_cast<size_t>(d), 1);
  // odometer with dimension 0 cycling fastest
  while (true) {
    int order = 0;
    for (int v : nu)
      if (v >= 2)
        ++order;
    if (order <= r)
      out.emplace_back(nu);
    int k = 0;
    while (k < d) {
      if (nu[static_cast<size_t>(k)] < caps[static_cast<size_t>(k)]) {
        ++nu[static_cast<size_t>(k)];
        break;
      }
      nu[static_cast<size_t>(k)] = 1;
      ++k;
    }
    if (k == d)
      break;
  }
  return out;
}

double psi(int nu, double t) {
  if (nu < 1)
    throw std::invalid_argument("psi: linear index must be >= 1");
  if (nu == 1)
    return 1.0;
  const int k = nu / 2;
  const double arg = kTwoPi * k * t;
  return nu % 2 == 0 ? kSqrt2 * std::cos(arg) : kSqrt2 * std::sin(arg);
}

double psi_deriv(int nu, double t) {
  if (nu < 1)
    throw std::invalid_argument("psi_deriv: linear index must be >= 1");
  if (nu == 1)
    return 0.0;
  const int k = nu / 2;
  const double arg = kTwoPi * k * t;
  // cos' = -2 pi k * (sine slot), sin' = 2 pi k * (cosine slot)
  return nu % 2 == 0 ? -kTwoPi * k * kSqrt2 * std::sin(arg)
                     : kTwoPi * k * kSqrt2 * std::cos(arg);
}

double eval_basis(const MultiIndex& nu, std::span<const double> t) {
  if (static_cast<int>(t.size()) != nu.dim())
    throw std::invalid_argument("eval_basis: point dimension mismatch");
  double prod = 1.0;
  for (int k = 0; k < nu.dim(); ++k)
    prod *= psi(nu[k], t[static_cast<size_t>(k)]);
  return prod;
}

double eval_basis_partial(const MultiIndex& nu, std::span<const double> t, int j) {
  if (static_cast<int>(t.size()) != nu.dim())
    throw std::invalid_argument("eval_basis_partial: point dimension mismatch");
  if (j < 0 || j >= nu.dim())
    throw std::invalid_argument("eval_basis_partial: dimension out of range");
  double prod = 1.0;
  for (int k = 0; k < nu.dim(); ++k) {
    const double tk = t[static_cast<size_t>(k)];
    prod *= (k == j) ? psi_deriv(nu[k], tk) : psi(nu[k], tk);
  }
  return prod;
}

double penalty_weight(const MultiIndex& nu, double m) {
  if (!(m > 1.5))
    throw std::invalid_argument("penalty_weight: smoothness order m must exceed 3/2");
  double w = 1.0;
  bool constant = true;
  for (int k = 0; k < nu.dim(); ++k) {
    const int freq = nu.frequency(k);
    if (freq >= 1) {
      constant = false;
      w *= std::pow(static_cast<double>(freq), 2.0 * m);
    }
  }
  return constant ? 0.0 : w;
}

double AnovaComponent::operator()(std::span<const double> t) const {
  double sum = 0.0;
  for (size_t i = 0; i < indices.size(); ++i)
    sum += coeffs[i] * eval_basis(indices[i], t);
  return sum;
}

std::map<std::vector<int>, AnovaComponent>
anova_components(const std::map<MultiIndex, double>& coeffs) {
  std::map<std::vector<int>, AnovaComponent> out;
  for (const auto& [nu, theta] : coeffs) {
    AnovaComponent& comp = out[nu.support()];
    comp.indices.push_back(nu);
    comp.coeffs.push_back(theta);
  }
  return out;
}

} // namespace ssanova
