#include "ssanova/kernel.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "ssanova/errors.hpp"

namespace ssanova {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// elementary symmetric sums e_0..e_r of vals, optionally skipping up to two
// positions
void elementary_sums(std::span<const double> vals, int r, int skip1, int skip2,
                     std::span<double> e) {
  for (int s = 0; s <= r; ++s)
    e[static_cast<size_t>(s)] = s == 0 ? 1.0 : 0.0;
  for (int k = 0; k < static_cast<int>(vals.size()); ++k) {
    if (k == skip1 || k == skip2)
      continue;
    for (int s = r; s >= 1; --s)
      e[static_cast<size_t>(s)] += e[static_cast<size_t>(s - 1)] * vals[static_cast<size_t>(k)];
  }
}

double sum_prefix(std::span<const double> e, int upto) {
  double s = 0.0;
  for (int i = 0; i <= upto; ++i)
    s += e[static_cast<size_t>(i)];
  return s;
}

} // namespace

PeriodicKernel::PeriodicKernel(double m, int series_cutoff) : m_(m), cutoff_(series_cutoff) {
  if (!(m > 1.5))
    throw std::invalid_argument("PeriodicKernel: smoothness order m must exceed 3/2");
  if (series_cutoff < 1)
    throw std::invalid_argument("PeriodicKernel: series cutoff must be >= 1");
  coef_.resize(cutoff_);
  for (int k = 1; k <= cutoff_; ++k)
    coef_(k - 1) = 2.0 * std::pow(static_cast<double>(k), -2.0 * m);
}

PeriodicKernel::Sections PeriodicKernel::sections(double delta) const {
  // cos/sin(2 pi k delta) by angle-addition recurrence
  const double c1 = std::cos(kTwoPi * delta);
  const double s1 = std::sin(kTwoPi * delta);
  double ck = c1, sk = s1;
  Sections out{0.0, 0.0, 0.0};
  for (int k = 1; k <= cutoff_; ++k) {
    const double a = coef_(k - 1);
    const double w = kTwoPi * k;
    out.value += a * ck;
    out.d1 -= a * w * sk;
    out.d2 -= a * w * w * ck;
    const double cn = ck * c1 - sk * s1;
    sk = sk * c1 + ck * s1;
    ck = cn;
  }
  return out;
}

double PeriodicKernel::operator()(double s, double t) const { return sections(s - t).value; }
double PeriodicKernel::d_s(double s, double t) const { return sections(s - t).d1; }
double PeriodicKernel::d_t(double s, double t) const { return -sections(s - t).d1; }
double PeriodicKernel::d_s_d_t(double s, double t) const { return -sections(s - t).d2; }

double PeriodicKernel::tail_bound() const {
  // 2 sum_{k>C} k^(-2m) <= 2 C^(1-2m) / (2m-1)
  return 2.0 * std::pow(static_cast<double>(cutoff_), 1.0 - 2.0 * m_) / (2.0 * m_ - 1.0);
}

double bernoulli_kernel_closed_form(int m, double s, double t) {
  double x = s - t;
  x -= std::floor(x);  // fractional part
  double b;
  switch (m) {
    case 1:
      b = x * x - x + 1.0 / 6.0;
      break;
    case 2:
      b = ((x - 2.0) * x + 1.0) * x * x - 1.0 / 30.0;
      break;
    case 3:
      b = (((x - 3.0) * x + 2.5) * x * x - 0.5) * x * x + 1.0 / 42.0;
      break;
    default:
      throw std::invalid_argument("bernoulli_kernel_closed_form: m must be 1, 2 or 3");
  }
  double fact = 1.0;
  for (int i = 2; i <= 2 * m; ++i)
    fact *= i;
  const double sign = (m % 2 == 0) ? -1.0 : 1.0;
  return sign * std::pow(kTwoPi, 2.0 * m) / fact * b;
}

AnovaKernel::AnovaKernel(PeriodicKernel base, int d, int r)
    : base_(std::move(base)), d_(d), r_(r) {
  if (d < 1)
    throw std::invalid_argument("AnovaKernel: d must be >= 1");
  if (r < 1 || r > d)
    throw std::invalid_argument("AnovaKernel: need 1 <= r <= d");
}

double AnovaKernel::section(int a, int b, std::span<const double> s,
                            std::span<const double> t, bool with_constant) const {
  if (static_cast<int>(s.size()) != d_ || static_cast<int>(t.size()) != d_)
    throw std::invalid_argument("AnovaKernel: point dimension mismatch");
  if (a < 0 || a > d_ || b < 0 || b > d_)
    throw std::invalid_argument("AnovaKernel: channel out of range");

  std::vector<double> kv(static_cast<size_t>(d_));
  std::vector<PeriodicKernel::Sections> sec(static_cast<size_t>(d_));
  for (int k = 0; k < d_; ++k) {
    sec[static_cast<size_t>(k)] =
        base_.sections(s[static_cast<size_t>(k)] - t[static_cast<size_t>(k)]);
    kv[static_cast<size_t>(k)] = sec[static_cast<size_t>(k)].value;
  }
  std::vector<double> e(static_cast<size_t>(r_) + 1);

  if (a == 0 && b == 0) {
    elementary_sums(kv, r_, -1, -1, e);
    double v = sum_prefix(e, r_);
    if (!with_constant)
      v -= 1.0;
    return v;
  }
  if (a >= 1 && b == 0) {
    const int i = a - 1;
    elementary_sums(kv, r_ - 1, i, -1, e);
    return sec[static_cast<size_t>(i)].d1 * sum_prefix(e, r_ - 1);
  }
  if (a == 0 && b >= 1) {
    const int j = b - 1;
    elementary_sums(kv, r_ - 1, j, -1, e);
    return -sec[static_cast<size_t>(j)].d1 * sum_prefix(e, r_ - 1);
  }
  const int i = a - 1, j = b - 1;
  if (i == j) {
    elementary_sums(kv, r_ - 1, i, -1, e);
    return -sec[static_cast<size_t>(i)].d2 * sum_prefix(e, r_ - 1);
  }
  if (r_ < 2)
    return 0.0;  // cross term needs both dimensions active
  elementary_sums(kv, r_ - 2, i, j, e);
  return sec[static_cast<size_t>(i)].d1 * (-sec[static_cast<size_t>(j)].d1) *
         sum_prefix(e, r_ - 2);
}

double AnovaKernel::eval(std::span<const double> s, std::span<const double> t) const {
  return section(0, 0, s, t, true);
}
double AnovaKernel::d_s(int i, std::span<const double> s, std::span<const double> t) const {
  return section(i + 1, 0, s, t, true);
}
double AnovaKernel::d_t(int j, std::span<const double> s, std::span<const double> t) const {
  return section(0, j + 1, s, t, true);
}
double AnovaKernel::d_s_d_t(int i, int j, std::span<const double> s,
                            std::span<const double> t) const {
  return section(i + 1, j + 1, s, t, true);
}

GramSystem assemble_gram(const DerivativeDataset& data, const FitConfig& config,
                         int series_cutoff) {
  data.validate();
  if (config.d != data.d || config.p != data.p)
    throw std::invalid_argument("assemble_gram: config does not match dataset shape");
  if (static_cast<int>(config.sigma.size()) != config.p)
    throw std::invalid_argument("assemble_gram: sigma vector must have length p");
  if (!(config.sigma0 > 0.0))
    throw std::invalid_argument("assemble_gram: sigma0 must be > 0");
  for (double s : config.sigma)
    if (!(s > 0.0))
      throw std::invalid_argument("assemble_gram: channel noise scales must be > 0");

  long total = 0;
  for (const ChannelData& ch : data.channels)
    total += ch.n();
  if (total == 0)
    throw std::invalid_argument("assemble_gram: no observations");

  GramSystem sys;
  sys.points.resize(total, data.d);
  sys.responses.resize(total);
  sys.weights.resize(total);
  sys.constant_column.resize(total);
  sys.row_channel.resize(static_cast<size_t>(total));

  long row = 0;
  for (int j = 0; j <= data.p; ++j) {
    const ChannelData& ch = data.channel(j);
    const double sigma_j = j == 0 ? config.sigma0 : config.sigma[static_cast<size_t>(j - 1)];
    for (long i = 0; i < ch.n(); ++i, ++row) {
      sys.points.row(row) = ch.points.row(i);
      sys.responses(row) = ch.responses(i);
      const double sig = ch.row_noise_scale.size() > 0 ? ch.row_noise_scale(i) : sigma_j;
      if (!(sig > 0.0))
        throw std::invalid_argument("assemble_gram: nonpositive row noise scale");
      sys.weights(row) =
          1.0 / (static_cast<double>(ch.n()) * (data.p + 1) * sig * sig);
      sys.constant_column(row) = j == 0 ? 1.0 : 0.0;
      sys.row_channel[static_cast<size_t>(row)] = j;
    }
  }

  const AnovaKernel kern(PeriodicKernel(config.m, series_cutoff), config.d, config.r);
  sys.gram.resize(total, total);
  std::vector<double> sa(static_cast<size_t>(data.d)), sb(static_cast<size_t>(data.d));
  for (long a = 0; a < total; ++a) {
    for (int k = 0; k < data.d; ++k)
      sa[static_cast<size_t>(k)] = sys.points(a, k);
    for (long b = 0; b <= a; ++b) {
      for (int k = 0; k < data.d; ++k)
        sb[static_cast<size_t>(k)] = sys.points(b, k);
      const double v = kern.section(sys.row_channel[static_cast<size_t>(a)],
                                    sys.row_channel[static_cast<size_t>(b)], sa, sb,
                                    /*with_constant=*/false);
      sys.gram(a, b) = v;
      sys.gram(b, a) = v;
    }
  }
  return sys;
}

namespace {

struct SaddleSolution {
  Eigen::VectorXd coef;
  double constant;
  double residual;
  bool finite;
};

// Solves the symmetric bordered system
//   [Q + lambda W^-1   e] [c]   [y]
//   [e'                0] [b] = [0]
// and measures first-order stationarity of the penalized least-squares
// objective relative to its right-hand side.
SaddleSolution solve_saddle(const GramSystem& sys, double lambda, double jitter) {
  const long M = sys.gram.rows();
  Eigen::MatrixXd A(M + 1, M + 1);
  A.topLeftCorner(M, M) = sys.gram;
  if (jitter > 0.0)
    A.topLeftCorner(M, M).diagonal().array() += jitter;
  if (lambda > 0.0)
    for (long i = 0; i < M; ++i)
      A(i, i) += lambda / sys.weights(i);
  A.block(0, M, M, 1) = sys.constant_column;
  A.block(M, 0, 1, M) = sys.constant_column.transpose();
  A(M, M) = 0.0;

  Eigen::VectorXd rhs(M + 1);
  rhs.head(M) = sys.responses;
  rhs(M) = 0.0;

  SaddleSolution out;
  Eigen::VectorXd sol;
  if (lambda == 0.0 && jitter == 0.0) {
    // without the ridge the bordered system can be rank-deficient even when a
    // consistent solution exists; detect that explicitly
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.rank() < M + 1) {
      out.coef = Eigen::VectorXd::Zero(M);
      out.constant = 0.0;
      out.finite = false;
      out.residual = std::numeric_limits<double>::infinity();
      return out;
    }
    sol = lu.solve(rhs);
  } else {
    sol = A.partialPivLu().solve(rhs);
  }
  out.coef = sol.head(M);
  out.constant = sol(M);
  out.finite = sol.allFinite();
  if (!out.finite) {
    out.residual = std::numeric_limits<double>::infinity();
    return out;
  }

  const Eigen::MatrixXd& Q = sys.gram;
  const Eigen::VectorXd resid =
      sys.responses - out.constant * sys.constant_column - Q * out.coef;
  const Eigen::VectorXd u = sys.weights.cwiseProduct(resid) - lambda * out.coef;
  Eigen::VectorXd grad(M + 1);
  grad.head(M) = Q * u;
  grad(M) = sys.constant_column.dot(sys.weights.cwiseProduct(resid));
  Eigen::VectorXd g0(M + 1);
  g0.head(M) = Q * sys.weights.cwiseProduct(sys.responses);
  g0(M) = sys.constant_column.dot(sys.weights.cwiseProduct(sys.responses));
  const double denom = std::max(g0.norm(), 1e-300);
  out.residual = grad.norm() / denom;
  return out;
}

} // namespace

KernelFit fit_regularized(const DerivativeDataset& data, double lambda,
                          const FitConfig& config, int series_cutoff) {
  if (lambda < 0.0)
    throw std::invalid_argument("fit_regularized: lambda must be >= 0");

  GramSystem sys = assemble_gram(data, config, series_cutoff);
  const long M = sys.gram.rows();

  constexpr double kResidualTol = 1e-8;
  SaddleSolution sol = solve_saddle(sys, lambda, 0.0);
  bool jitter_applied = false;
  if (!(sol.finite && sol.residual <= kResidualTol)) {
    if (lambda == 0.0)
      throw DegeneracyError(
          "fit_regularized: singular representer system at lambda = 0 "
          "(stationarity residual " +
          std::to_string(sol.residual) + ")");
    const double jitter = 1e-10 * sys.gram.trace() / static_cast<double>(M);
    std::cerr << "fit_regularized: factorization failed, retrying with diagonal jitter "
              << jitter << "\n";
    sol = solve_saddle(sys, lambda, jitter);
    jitter_applied = true;
    if (!(sol.finite && sol.residual <= kResidualTol))
      throw DegeneracyError(
          "fit_regularized: penalized system remained singular after jitter "
          "(stationarity residual " +
          std::to_string(sol.residual) + ")");
  }

  KernelFit fit;
  fit.config = config;
  fit.config.lambda = lambda;
  fit.series_cutoff = series_cutoff;
  fit.points = std::move(sys.points);
  fit.row_channel = std::move(sys.row_channel);
  fit.coefficients = std::move(sol.coef);
  fit.null_coeff = sol.constant;
  fit.stationarity_residual = sol.residual;
  fit.jitter_applied = jitter_applied;
  return fit;
}

double predict(const KernelFit& fit, std::span<const double> t,
               std::span<const int> deriv_mask) {
  const int d = fit.config.d;
  if (static_cast<int>(t.size()) != d || static_cast<int>(deriv_mask.size()) != d)
    throw std::invalid_argument("predict: point/mask dimension mismatch");
  int order = 0, active = -1;
  for (int k = 0; k < d; ++k) {
    if (deriv_mask[static_cast<size_t>(k)] == 1) {
      ++order;
      active = k;
    } else if (deriv_mask[static_cast<size_t>(k)] != 0) {
      throw std::invalid_argument("predict: mask entries must be 0 or 1");
    }
  }
  if (order > 1)
    throw std::invalid_argument(
        "predict: mixed partials are not available from kernel sections");

  const AnovaKernel kern(PeriodicKernel(fit.config.m, fit.series_cutoff), d, fit.config.r);
  const int b = order == 0 ? 0 : active + 1;

  std::vector<double> x(static_cast<size_t>(d));
  double sum = order == 0 ? fit.null_coeff : 0.0;
  for (long i = 0; i < fit.points.rows(); ++i) {
    for (int k = 0; k < d; ++k)
      x[static_cast<size_t>(k)] = fit.points(i, k);
    sum += fit.coefficients(i) *
           kern.section(fit.row_channel[static_cast<size_t>(i)], b, x, t,
                        /*with_constant=*/false);
  }
  return sum;
}

double KernelFit::operator()(std::span<const double> t,
                             std::span<const int> deriv_mask) const {
  return predict(*this, t, deriv_mask);
}

DerivativeDataset preprocess_known_density(
    const DerivativeDataset& data,
    const std::vector<std::vector<CoordinateDensity>>& densities) {
  data.validate();
  if (static_cast<int>(densities.size()) != data.p + 1)
    throw std::invalid_argument("preprocess_known_density: need one density set per channel");
  for (const auto& chdens : densities)
    if (static_cast<int>(chdens.size()) != data.d)
      throw std::invalid_argument(
          "preprocess_known_density: need one coordinate density per dimension");

  DerivativeDataset out = data;
  for (int j = 0; j <= data.p; ++j) {
    ChannelData& ch = out.channels[static_cast<size_t>(j)];
    const auto& chdens = densities[static_cast<size_t>(j)];
    const long n = ch.n();
    Eigen::VectorXd row_sigma(n);
    for (long i = 0; i < n; ++i) {
      double density_j = 1.0;
      for (int k = 0; k < data.d; ++k) {
        const double tk = ch.points(i, k);
        if (j >= 1 && k == j - 1) {
          density_j = chdens[static_cast<size_t>(k)].pdf(tk);
          if (!(density_j > 0.0))
            throw std::invalid_argument(
                "preprocess_known_density: nonpositive density at a design point");
        }
        ch.points(i, k) = chdens[static_cast<size_t>(k)].cdf(tk);
      }
      if (j >= 1) {
        ch.responses(i) /= density_j;
        row_sigma(i) = ch.noise_scale / density_j;
      }
    }
    if (j >= 1)
      ch.row_noise_scale = row_sigma;
  }
  out.validate();
  return out;
}

std::string serialize(const KernelFit& fit) {
  std::ostringstream os;
  os << "# kernel_fit m=" << fmt_double(fit.config.m) << " r=" << fit.config.r
     << " d=" << fit.config.d << " p=" << fit.config.p
     << " lambda=" << fmt_double(fit.config.lambda)
     << " sigma0=" << fmt_double(fit.config.sigma0) << " sigma=";
  if (fit.config.sigma.empty())
    os << "-";
  for (size_t j = 0; j < fit.config.sigma.size(); ++j)
    os << (j ? "," : "") << fmt_double(fit.config.sigma[j]);
  os << " series_cutoff=" << fit.series_cutoff
     << " null_coeff=" << fmt_double(fit.null_coeff)
     << " stationarity=" << fmt_double(fit.stationarity_residual)
     << " jitter=" << (fit.jitter_applied ? 1 : 0) << "\n";
  os << "channel";
  for (int k = 1; k <= fit.config.d; ++k)
    os << ",t" << k;
  os << ",coef\n";
  for (long i = 0; i < fit.points.rows(); ++i) {
    os << fit.row_channel[static_cast<size_t>(i)];
    for (int k = 0; k < fit.config.d; ++k)
      os << "," << fmt_double(fit.points(i, k));
    os << "," << fmt_double(fit.coefficients(i)) << "\n";
  }
  return os.str();
}

KernelFit parse_kernel_fit(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind("# kernel_fit ", 0) != 0)
    throw std::invalid_argument("kernel_fit: missing header line");

  KernelFit fit;
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
      } else if (key == "series_cutoff")
        fit.series_cutoff = std::stoi(val);
      else if (key == "null_coeff")
        fit.null_coeff = std::stod(val);
      else if (key == "stationarity")
        fit.stationarity_residual = std::stod(val);
      else if (key == "jitter")
        fit.jitter_applied = val != "0";
    }
  }
  if (!std::getline(is, line))
    throw std::invalid_argument("kernel_fit: missing column header");

  std::vector<int> channels;
  std::vector<double> coords, coefs;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#')
      continue;
    std::istringstream ls(line);
    std::string item;
    if (!std::getline(ls, item, ','))
      throw std::invalid_argument("kernel_fit: short row");
    channels.push_back(std::stoi(item));
    for (int k = 0; k < fit.config.d; ++k) {
      if (!std::getline(ls, item, ','))
        throw std::invalid_argument("kernel_fit: short row");
      coords.push_back(std::stod(item));
    }
    if (!std::getline(ls, item, ','))
      throw std::invalid_argument("kernel_fit: missing coefficient");
    coefs.push_back(std::stod(item));
  }
  const long M = static_cast<long>(channels.size());
  fit.points.resize(M, fit.config.d);
  fit.coefficients.resize(M);
  fit.row_channel = std::move(channels);
  for (long i = 0; i < M; ++i) {
    for (int k = 0; k < fit.config.d; ++k)
      fit.points(i, k) = coords[static_cast<size_t>(i) * fit.config.d + static_cast<size_t>(k)];
    fit.coefficients(i) = coefs[static_cast<size_t>(i)];
  }
  return fit;
}

} // namespace ssanova
