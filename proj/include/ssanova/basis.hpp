#pragma once

#include <compare>
#include <map>
#include <span>
#include <vector>

namespace ssanova {

/** \file  basis.hpp
    \brief Tensor-product trigonometric basis with ANOVA index bookkeeping.

    One-dimensional basis functions are addressed by a linear index nu >= 1:
    nu = 1 is the constant, nu = 2k the cosine at frequency k, nu = 2k+1 the
    sine at frequency k (k >= 1).  Multivariate basis functions are products
    of one-dimensional ones, addressed by a MultiIndex.
*/

/// frequency k of the linear index (0 for the constant slot)
inline int index_frequency(int nu) { return nu / 2; }

/// true for sine slots (2k+1 with k >= 1)
inline bool is_sine_slot(int nu) { return nu >= 3 && nu % 2 == 1; }

/// true for cosine slots (2k with k >= 1)
inline bool is_cosine_slot(int nu) { return nu >= 2 && nu % 2 == 0; }

/// Per-dimension linear basis indices of one tensor-product basis function.
class MultiIndex {
public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> indices);

  int dim() const { return static_cast<int>(indices_.size()); }
  int operator[](int k) const { return indices_[static_cast<size_t>(k)]; }
  int frequency(int k) const { return indices_[static_cast<size_t>(k)] / 2; }

  /// number of dimensions in which the index is non-constant
  int interaction_order() const;

  /// dimensions with nu_k >= 2, ascending
  std::vector<int> support() const;

  const std::vector<int>& values() const { return indices_; }

  auto operator<=>(const MultiIndex&) const = default;

private:
  std::vector<int> indices_;
};

/// Shape of a truncated tensor-product basis: dimension d, maximum
/// interaction order r, smoothness order m (> 3/2), and the per-dimension
/// linear-index cutoff (odd, cutoff = 2K+1 for maximum frequency K).
struct BasisSpec {
  int d = 1;
  int r = 1;
  double m = 2.0;
  int cutoff = 1;

  BasisSpec(int d, int r, double m, int cutoff);
};

/// All multi-indices with 1 <= nu_k <= cutoff and interaction order <= r.
/// Deterministic order: the first dimension cycles fastest, so for d = 2
/// the sequence starts (1,1),(2,1),...  Count equals
/// sum_{s=0}^{r} C(d,s) * (cutoff-1)^s.
std::vector<MultiIndex> enumerate_indices(const BasisSpec& spec);

/// Same enumeration with per-dimension caps (caps need not be odd; lattice
/// truncations stop at the grid resolution).
std::vector<MultiIndex> enumerate_indices(std::span<const int> caps, int r);

/// One-dimensional basis function: psi_1 = 1, psi_{2k} = sqrt(2) cos(2 pi k t),
/// psi_{2k+1} = sqrt(2) sin(2 pi k t).
double psi(int nu, double t);

/// d/dt of psi: psi_1' = 0, psi_{2k}' = -2 pi k psi_{2k+1},
/// psi_{2k+1}' = 2 pi k psi_{2k}.
double psi_deriv(int nu, double t);

/// prod_k psi_{nu_k}(t_k)
double eval_basis(const MultiIndex& nu, std::span<const double> t);

/// exact partial derivative of eval_basis with respect to t_j (j zero-based)
double eval_basis_partial(const MultiIndex& nu, std::span<const double> t, int j);

/// Roughness-penalty weight of the coefficient at nu: 0 when every slot is
/// constant, otherwise prod over non-constant dimensions of k^(2m).
double penalty_weight(const MultiIndex& nu, double m);

/// One functional-ANOVA component: the part of a series supported on a fixed
/// set of active dimensions.
struct AnovaComponent {
  std::vector<MultiIndex> indices;
  std::vector<double> coeffs;

  double operator()(std::span<const double> t) const;
};

/// Groups a coefficient map by support set.  Each component integrates to
/// zero along every active coordinate; summing all components reproduces the
/// full series.
std::map<std::vector<int>, AnovaComponent>
anova_components(const std::map<MultiIndex, double>& coeffs);

} // namespace ssanova
