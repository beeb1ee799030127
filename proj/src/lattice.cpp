#include "ssanova/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "ssanova/sim.hpp"

namespace ssanova {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// per-dimension table of psi_nu(i/l), nu = 1..cap, i = 1..l
Eigen::MatrixXd basis_table(int cap, int l) {
  Eigen::MatrixXd tab(cap, l);
  for (int nu = 1; nu <= cap; ++nu)
    for (int i = 1; i <= l; ++i)
      tab(nu - 1, i - 1) = psi(nu, static_cast<double>(i) / l);
  return tab;
}

// Contracts the row-major response tensor with the per-dimension tables,
// giving <y, psi_nu>_n for every nu in the full cap box.
Eigen::VectorXd project_all(const Eigen::VectorXd& y, const std::vector<int>& dims,
                            const std::vector<int>& caps) {
  const int d = static_cast<int>(dims.size());
  std::vector<double> cur(y.data(), y.data() + y.size());
  std::vector<int> shape = dims;
  for (int k = 0; k < d; ++k) {
    const int l = dims[static_cast<size_t>(k)];
    const int cap = caps[static_cast<size_t>(k)];
    const Eigen::MatrixXd tab = basis_table(cap, l);
    long outer = 1, inner = 1;
    for (int j = 0; j < k; ++j)
      outer *= shape[static_cast<size_t>(j)];
    for (int j = k + 1; j < d; ++j)
      inner *= shape[static_cast<size_t>(j)];
    std::vector<double> next(static_cast<size_t>(outer) * cap * static_cast<size_t>(inner));
    for (long o = 0; o < outer; ++o)
      for (int nu = 0; nu < cap; ++nu)
        for (long in = 0; in < inner; ++in) {
          double acc = 0.0;
          const size_t base = (static_cast<size_t>(o) * static_cast<size_t>(l)) *
                              static_cast<size_t>(inner) + static_cast<size_t>(in);
          for (int i = 0; i < l; ++i)
            acc += cur[base + static_cast<size_t>(i) * static_cast<size_t>(inner)] * tab(nu, i);
          next[(static_cast<size_t>(o) * static_cast<size_t>(cap) + static_cast<size_t>(nu)) *
                   static_cast<size_t>(inner) + static_cast<size_t>(in)] = acc;
        }
    cur.swap(next);
    shape[static_cast<size_t>(k)] = cap;
  }
  long total = 1;
  for (int c : caps)
    total *= c;
  Eigen::VectorXd out(total);
  long n = 1;
  for (int l : dims)
    n *= l;
  for (long i = 0; i < total; ++i)
    out(i) = cur[static_cast<size_t>(i)] / static_cast<double>(n);
  return out;
}

long flat_position(const MultiIndex& nu, const std::vector<int>& caps) {
  long pos = 0;
  for (int k = 0; k < nu.dim(); ++k)
    pos = pos * caps[static_cast<size_t>(k)] + (nu[k] - 1);
  return pos;
}

// Recovers lattice resolutions from a channel's points; throws if the rows
// are not exactly the row-major regular grid.
std::vector<int> infer_resolutions(const Eigen::MatrixXd& pts, int d) {
  std::vector<int> res(static_cast<size_t>(d));
  for (int k = 0; k < d; ++k) {
    std::vector<double> vals(pts.col(k).data(), pts.col(k).data() + pts.rows());
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               vals.end());
    res[static_cast<size_t>(k)] = static_cast<int>(vals.size());
  }
  LatticeDesign lat = make_lattice(res);
  if (lat.n() != pts.rows())
    throw std::invalid_argument("transform: design points do not form a regular lattice");
  std::vector<double> expect(static_cast<size_t>(d));
  for (long i = 0; i < pts.rows(); ++i) {
    lat.point_at(i, expect);
    for (int k = 0; k < d; ++k)
      if (std::abs(pts(i, k) - expect[static_cast<size_t>(k)]) > 1e-10)
        throw std::invalid_argument(
            "transform: design points do not form a regular lattice in row-major order");
  }
  return res;
}

} // namespace

long LatticeDesign::n() const {
  long total = 1;
  for (int l : resolutions)
    total *= l;
  return total;
}

void LatticeDesign::point_at(long row, std::span<double> out) const {
  const int d = dim();
  long rem = row;
  for (int k = d - 1; k >= 0; --k) {
    const int l = resolutions[static_cast<size_t>(k)];
    const long i = rem % l;
    rem /= l;
    out[static_cast<size_t>(k)] = static_cast<double>(i + 1) / l;
  }
}

Eigen::MatrixXd LatticeDesign::points() const {
  Eigen::MatrixXd pts(n(), dim());
  std::vector<double> buf(static_cast<size_t>(dim()));
  for (long i = 0; i < n(); ++i) {
    point_at(i, buf);
    for (int k = 0; k < dim(); ++k)
      pts(i, k) = buf[static_cast<size_t>(k)];
  }
  return pts;
}

LatticeDesign make_lattice(std::vector<int> resolutions) {
  if (resolutions.empty())
    throw std::invalid_argument("make_lattice: empty resolution vector");
  for (int l : resolutions)
    if (l < 1)
      throw std::invalid_argument("make_lattice: resolutions must be >= 1");
  return LatticeDesign{std::move(resolutions)};
}

std::vector<ChannelCoefficients> transform(const DerivativeDataset& data,
                                           const BasisSpec& spec) {
  data.validate();
  if (spec.d != data.d)
    throw std::invalid_argument("transform: basis dimension does not match dataset");

  const std::vector<int> res = infer_resolutions(data.channel(0).points, data.d);
  for (int j = 1; j <= data.p; ++j) {
    const std::vector<int> rj = infer_resolutions(data.channel(j).points, data.d);
    if (rj != res)
      throw std::invalid_argument("transform: channels observed on different lattices");
  }

  std::vector<int> caps(static_cast<size_t>(data.d));
  for (int k = 0; k < data.d; ++k)
    caps[static_cast<size_t>(k)] = std::min(spec.cutoff, res[static_cast<size_t>(k)]);
  const std::vector<MultiIndex> indices = enumerate_indices(caps, spec.r);
  const long n = data.channel(0).n();

  std::vector<ChannelCoefficients> out;
  for (int j = 0; j <= data.p; ++j) {
    const ChannelData& ch = data.channel(j);
    const Eigen::VectorXd proj = project_all(ch.responses, res, caps);

    ChannelCoefficients cc;
    cc.channel = j;
    cc.resolutions = res;
    cc.indices = indices;
    cc.values.resize(static_cast<long>(indices.size()));
    cc.noise_scale = j == 0 ? ch.noise_scale / std::sqrt(static_cast<double>(n))
                            : ch.noise_scale / (kTwoPi * std::sqrt(static_cast<double>(n)));

    for (size_t idx = 0; idx < indices.size(); ++idx) {
      const MultiIndex& nu = indices[idx];
      double z;
      if (j == 0) {
        z = proj(flat_position(nu, caps));
      } else {
        const int dim_j = j - 1;
        const int nuj = nu[dim_j];
        const int cap_j = caps[static_cast<size_t>(dim_j)];
        if (is_sine_slot(nuj)) {
          // sine slot reads the cosine-slot projection
          std::vector<int> v = nu.values();
          v[static_cast<size_t>(dim_j)] = nuj - 1;
          z = proj(flat_position(MultiIndex(v), caps)) / kTwoPi;
        } else if (is_cosine_slot(nuj)) {
          if (nuj + 1 > cap_j) {
            // the sine partner samples to zero at the grid Nyquist frequency
            z = 0.0;
          } else {
            std::vector<int> v = nu.values();
            v[static_cast<size_t>(dim_j)] = nuj + 1;
            z = -proj(flat_position(MultiIndex(v), caps)) / kTwoPi;
          }
        } else {
          // constant slot along the derivative dimension: no signal content
          z = proj(flat_position(nu, caps)) / kTwoPi;
        }
      }
      cc.values(static_cast<long>(idx)) = z;
    }
    out.push_back(std::move(cc));
  }
  return out;
}

SpectralFit shrink(const std::vector<ChannelCoefficients>& channels, double lambda,
                   const FitConfig& config) {
  if (channels.empty())
    throw std::invalid_argument("shrink: no channels");
  if (lambda < 0.0)
    throw std::invalid_argument("shrink: lambda must be >= 0");
  if (!(config.sigma0 > 0.0))
    throw std::invalid_argument("shrink: sigma0 must be > 0");
  const int p = config.p;
  if (static_cast<int>(channels.size()) != p + 1)
    throw std::invalid_argument("shrink: channel count does not match config.p");
  if (static_cast<int>(config.sigma.size()) != p)
    throw std::invalid_argument("shrink: sigma vector must have length p");
  for (double s : config.sigma)
    if (!(s > 0.0))
      throw std::invalid_argument("shrink: channel noise scales must be > 0");
  for (int j = 0; j <= p; ++j) {
    if (channels[static_cast<size_t>(j)].channel != j)
      throw std::invalid_argument("shrink: channels out of order");
    if (channels[static_cast<size_t>(j)].indices != channels[0].indices)
      throw std::invalid_argument("shrink: channel coefficient enumerations differ");
  }
  if (!channels[0].indices.empty() && channels[0].indices[0].dim() != config.d)
    throw std::invalid_argument("shrink: index dimension does not match config.d");

  const std::vector<MultiIndex>& indices = channels[0].indices;
  const double inv_s0 = 1.0 / (config.sigma0 * config.sigma0);
  std::vector<double> inv_st(static_cast<size_t>(p));
  for (int j = 0; j < p; ++j) {
    // scaled-channel variance sigma_j^2 / (4 pi^2), matching the transform
    const double st2 = config.sigma[static_cast<size_t>(j)] *
                       config.sigma[static_cast<size_t>(j)] / (kTwoPi * kTwoPi);
    inv_st[static_cast<size_t>(j)] = 1.0 / st2;
  }

  SpectralFit fit;
  fit.config = config;
  fit.config.lambda = lambda;
  fit.resolutions = channels[0].resolutions;
  fit.indices = indices;
  fit.coeffs.resize(static_cast<long>(indices.size()));

  for (size_t i = 0; i < indices.size(); ++i) {
    const MultiIndex& nu = indices[i];
    double num = inv_s0 * channels[0].values(static_cast<long>(i));
    double den = inv_s0 + lambda * penalty_weight(nu, config.m);
    for (int j = 1; j <= p; ++j) {
      const double kj = nu.frequency(j - 1);
      num += inv_st[static_cast<size_t>(j - 1)] * kj *
             channels[static_cast<size_t>(j)].values(static_cast<long>(i));
      den += inv_st[static_cast<size_t>(j - 1)] * kj * kj;
    }
    fit.coeffs(static_cast<long>(i)) = num / den;
  }
  return fit;
}

double evaluate_series(const std::vector<MultiIndex>& indices,
                       const Eigen::VectorXd& coeffs, std::span<const double> t,
                       std::span<const int> deriv_mask) {
  const int d = static_cast<int>(t.size());
  if (static_cast<int>(deriv_mask.size()) != d)
    throw std::invalid_argument("evaluate_series: point/mask dimension mismatch");
  for (int b : deriv_mask)
    if (b != 0 && b != 1)
      throw std::invalid_argument("evaluate_series: mask entries must be 0 or 1");
  if (indices.empty())
    return 0.0;
  if (indices[0].dim() != d)
    throw std::invalid_argument("evaluate_series: index dimension mismatch");

  int maxcap = 0;
  for (const MultiIndex& nu : indices)
    for (int k = 0; k < d; ++k)
      maxcap = std::max(maxcap, nu[k]);

  // per-dimension value tables, derivative rule applied where masked
  Eigen::MatrixXd tab(d, maxcap);
  for (int k = 0; k < d; ++k)
    for (int nu = 1; nu <= maxcap; ++nu)
      tab(k, nu - 1) = deriv_mask[static_cast<size_t>(k)]
                           ? psi_deriv(nu, t[static_cast<size_t>(k)])
                           : psi(nu, t[static_cast<size_t>(k)]);

  double sum = 0.0;
  for (size_t i = 0; i < indices.size(); ++i) {
    const MultiIndex& nu = indices[i];
    double prod = coeffs(static_cast<long>(i));
    for (int k = 0; k < d; ++k)
      prod *= tab(k, nu[k] - 1);
    sum += prod;
  }
  return sum;
}

double evaluate_fit(const SpectralFit& fit, std::span<const double> t,
                    std::span<const int> deriv_mask) {
  if (static_cast<int>(t.size()) != fit.config.d)
    throw std::invalid_argument("evaluate_fit: point dimension mismatch");
  return evaluate_series(fit.indices, fit.coeffs, t, deriv_mask);
}

double SpectralFit::operator()(std::span<const double> t,
                               std::span<const int> deriv_mask) const {
  return evaluate_fit(*this, t, deriv_mask);
}

double tune_lambda(long n, double m, int d, int r, int p, LambdaMode mode, double c) {
  if (n < 2)
    throw std::invalid_argument("tune_lambda: n must be >= 2");
  if (!(m > 1.5))
    throw std::invalid_argument("tune_lambda: m must exceed 3/2");
  if (d < 1 || r < 1 || r > d)
    throw std::invalid_argument("tune_lambda: need 1 <= r <= d");
  if (p < 0 || p > d)
    throw std::invalid_argument("tune_lambda: need 0 <= p <= d");
  if (!(c > 0.0))
    throw std::invalid_argument("tune_lambda: c must be > 0");

  const double nn = static_cast<double>(n);
  if (mode == LambdaMode::first_partial)
    return c * std::pow(nn, -2.0 * (m - 1.0) / (2.0 * m - 1.0));

  if (p < d) {
    const int cut = std::min(d - p, r);
    const double base = nn * std::pow(std::log(nn), 1.0 - cut);
    return c * std::pow(base, -2.0 * m / (2.0 * m + 1.0));
  }
  if (r >= 3)
    return c * std::pow(nn, -(2.0 * m * r - 2.0) / ((2.0 * m + 1.0) * r - 2.0));
  if (r == 2)
    return c * std::pow(nn * std::log(nn), -(2.0 * m - 1.0) / (2.0 * m));
  return c * std::pow(nn, -(m - 1.0) / m);
}

LambdaSearchResult lambda_grid_search(const DerivativeDataset& data, const BasisSpec& spec,
                                      const FitConfig& config, const FieldEvaluator& truth,
                                      std::span<const double> grid,
                                      int quad_points_per_dim) {
  if (grid.empty())
    throw std::invalid_argument("lambda_grid_search: empty lambda grid");

  const std::vector<ChannelCoefficients> channels = transform(data, spec);
  const std::vector<int> mask(static_cast<size_t>(data.d), 0);

  LambdaSearchResult result;
  result.best_lambda = grid[0];
  double best_err = std::numeric_limits<double>::infinity();
  for (double lam : grid) {
    const SpectralFit fit = shrink(channels, lam, config);
    const double err = l2_error(
        [&fit](std::span<const double> t, std::span<const int> mk) { return fit(t, mk); },
        truth, mask, data.d, quad_points_per_dim);
    result.curve.emplace_back(lam, err);
    if (err < best_err || (err == best_err && lam < result.best_lambda)) {
      best_err = err;
      result.best_lambda = lam;
    }
  }
  return result;
}

std::string serialize(const SpectralFit& fit) {
  std::ostringstream os;
  os << "# spectral_fit m=" << fmt_double(fit.config.m) << " r=" << fit.config.r
     << " d=" << fit.config.d << " p=" << fit.config.p
     << " lambda=" << fmt_double(fit.config.lambda)
     << " sigma0=" << fmt_double(fit.config.sigma0) << " sigma=";
  if (fit.config.sigma.empty())
    os << "-";
  for (size_t j = 0; j < fit.config.sigma.size(); ++j)
    os << (j ? "," : "") << fmt_double(fit.config.sigma[j]);
  os << " resolutions=";
  if (fit.resolutions.empty())
    os << "-";
  for (size_t k = 0; k < fit.resolutions.size(); ++k)
    os << (k ? "," : "") << fit.resolutions[k];
  os << "\n";
  for (int k = 1; k <= fit.config.d; ++k)
    os << "nu" << k << (k == fit.config.d ? "" : ",");
  os << ",theta\n";
  for (size_t i = 0; i < fit.indices.size(); ++i) {
    for (int k = 0; k < fit.config.d; ++k)
      os << fit.indices[i][k] << ",";
    os << fmt_double(fit.coeffs(static_cast<long>(i))) << "\n";
  }
  return os.str();
}

SpectralFit parse_spectral_fit(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind("# spectral_fit ", 0) != 0)
    throw std::invalid_argument("spectral_fit: missing header line");

  SpectralFit fit;
  {
    std::istringstream hs(line.substr(2));
    std::string tok;
    while (hs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos)
        continue;
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "m")
        fit.config.m = std::stod(val);
      else if (key == "r")
        fit.config.r = std::stoi(val);
      else if (key == "d")
        fit.config.d = std::stoi(val);
      else if (key == "p")
        fit.config.p = std::stoi(val);
      else if (key == "lambda")
        fit.config.lambda = std::stod(val);
      else if (key == "sigma0")
        fit.config.sigma0 = std::stod(val);
      else if (key == "sigma" && val != "-") {
        std::istringstream vs(val);
        std::string item;
        while (std::getline(vs, item, ','))
          fit.config.sigma.push_back(std::stod(item));
      } else if (key == "resolutions" && val != "-") {
        std::istringstream vs(val);
        std::string item;
        while (std::getline(vs, item, ','))
          fit.resolutions.push_back(std::stoi(item));
      }
    }
  }
  if (!std::getline(is, line))
    throw std::invalid_argument("spectral_fit: missing column header");

  std::vector<double> coeffs;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#')
      continue;
    std::istringstream ls(line);
    std::string item;
    std::vector<int> nu;
    for (int k = 0; k < fit.config.d; ++k) {
      if (!std::getline(ls, item, ','))
        throw std::invalid_argument("spectral_fit: short row");
      nu.push_back(std::stoi(item));
    }
    if (!std::getline(ls, item, ','))
      throw std::invalid_argument("spectral_fit: missing coefficient");
    fit.indices.emplace_back(std::move(nu));
    coeffs.push_back(std::stod(item));
  }
  fit.coeffs = Eigen::Map<const Eigen::VectorXd>(coeffs.data(),
                                                 static_cast<long>(coeffs.size()));
  return fit;
}

} // namespace ssanova
