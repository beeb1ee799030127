#include "ssanova/sim.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include "ssanova/lattice.hpp"
#include "ssanova/rng.hpp"

namespace ssanova {

namespace {

constexpr std::uint64_t kTruthTag = 11;
constexpr std::uint64_t kDesignTag = 12;
constexpr std::uint64_t kNoiseTag = 13;

double decay_magnitude(const MultiIndex& nu, double m, double eps) {
  double mag = 1.0;
  for (int k = 0; k < nu.dim(); ++k) {
    const int freq = nu.frequency(k);
    if (freq >= 1)
      mag *= std::pow(static_cast<double>(freq), -(m + 0.5 + eps));
  }
  return mag;
}

} // namespace

double Truth::operator()(std::span<const double> t, std::span<const int> deriv_mask) const {
  if (static_cast<int>(t.size()) != d)
    throw std::invalid_argument("Truth: point dimension mismatch");
  return evaluate_series(indices, coeffs, t, deriv_mask);
}

double Truth::penalty_functional() const {
  double j = 0.0;
  for (size_t i = 0; i < indices.size(); ++i)
    j += penalty_weight(indices[i], m) * coeffs(static_cast<long>(i)) *
         coeffs(static_cast<long>(i));
  return j;
}

std::string Truth::hash() const {
  // FNV-1a over the exact coefficient bytes and index values
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t x) {
    for (int b = 0; b < 8; ++b) {
      h ^= (x >> (8 * b)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  mix(static_cast<std::uint64_t>(d));
  for (size_t i = 0; i < indices.size(); ++i) {
    for (int k = 0; k < d; ++k)
      mix(static_cast<std::uint64_t>(indices[i][k]));
    std::uint64_t bits;
    const double c = coeffs(static_cast<long>(i));
    static_assert(sizeof(bits) == sizeof(c));
    std::memcpy(&bits, &c, sizeof(bits));
    mix(bits);
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Truth sample_truth(const TruthSpec& spec, std::uint64_t seed) {
  Truth truth;
  truth.d = spec.d;
  truth.m = spec.m;

  if (!spec.fixed_coeffs.empty()) {
    truth.indices.reserve(spec.fixed_coeffs.size());
    truth.coeffs.resize(static_cast<long>(spec.fixed_coeffs.size()));
    for (size_t i = 0; i < spec.fixed_coeffs.size(); ++i) {
      if (spec.fixed_coeffs[i].first.dim() != spec.d)
        throw std::invalid_argument("sample_truth: fixed coefficient dimension mismatch");
      truth.indices.push_back(spec.fixed_coeffs[i].first);
      truth.coeffs(static_cast<long>(i)) = spec.fixed_coeffs[i].second;
    }
    return truth;
  }

  const BasisSpec basis(spec.d, spec.r, spec.m, spec.cutoff);
  truth.indices = enumerate_indices(basis);
  truth.coeffs.resize(static_cast<long>(truth.indices.size()));
  Rng rng = Rng::derive(seed, {kTruthTag});
  for (size_t i = 0; i < truth.indices.size(); ++i)
    truth.coeffs(static_cast<long>(i)) =
        rng.sign() * decay_magnitude(truth.indices[i], spec.m, spec.extra_decay);
  return truth;
}

std::string serialize(const Truth& truth) {
  std::ostringstream os;
  os << "# truth d=" << truth.d << " m=";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", truth.m);
  os << buf << "\n";
  for (int k = 1; k <= truth.d; ++k)
    os << "nu" << k << ",";
  os << "theta\n";
  for (size_t i = 0; i < truth.indices.size(); ++i) {
    for (int k = 0; k < truth.d; ++k)
      os << truth.indices[i][k] << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", truth.coeffs(static_cast<long>(i)));
    os << buf << "\n";
  }
  return os.str();
}

Truth parse_truth(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind("# truth ", 0) != 0)
    throw std::invalid_argument("truth: missing header line");
  Truth truth;
  {
    std::istringstream hs(line.substr(2));
    std::string tok;
    while (hs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos)
        continue;
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "d")
        truth.d = std::stoi(val);
      else if (key == "m")
        truth.m = std::stod(val);
    }
  }
  if (!std::getline(is, line))
    throw std::invalid_argument("truth: missing column header");
  std::vector<double> coeffs;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#')
      continue;
    std::istringstream ls(line);
    std::string item;
    std::vector<int> nu;
    for (int k = 0; k < truth.d; ++k) {
      if (!std::getline(ls, item, ','))
        throw std::invalid_argument("truth: short row");
      nu.push_back(std::stoi(item));
    }
    if (!std::getline(ls, item, ','))
      throw std::invalid_argument("truth: missing coefficient");
    truth.indices.emplace_back(std::move(nu));
    coeffs.push_back(std::stod(item));
  }
  truth.coeffs = Eigen::Map<const Eigen::VectorXd>(coeffs.data(),
                                                   static_cast<long>(coeffs.size()));
  return truth;
}

DerivativeDataset gen_data(const Truth& truth, const DesignKind& kind, int p,
                           std::span<const double> sigmas, std::uint64_t seed,
                           bool shared_design) {
  if (p < 0 || p > truth.d)
    throw std::invalid_argument("gen_data: need 0 <= p <= d");
  if (static_cast<int>(sigmas.size()) != p + 1)
    throw std::invalid_argument("gen_data: sigma vector must have length p+1");
  for (double s : sigmas)
    if (s < 0.0)
      throw std::invalid_argument("gen_data: noise scales must be >= 0");

  const int d = truth.d;

  auto draw_points = [&](int channel) {
    Eigen::MatrixXd pts;
    if (const auto* lat = std::get_if<LatticeKind>(&kind)) {
      pts = make_lattice(lat->resolutions).points();
    } else if (const auto* unif = std::get_if<IidUniformKind>(&kind)) {
      Rng rng = Rng::derive(seed, {kDesignTag, static_cast<std::uint64_t>(channel)});
      pts.resize(unif->n, d);
      for (long i = 0; i < unif->n; ++i)
        for (int k = 0; k < d; ++k)
          pts(i, k) = rng.uniform();
    } else {
      const auto& dens = std::get<IidDensityKind>(kind);
      if (static_cast<int>(dens.densities.size()) != p + 1)
        throw std::invalid_argument("gen_data: need one density set per channel");
      const auto& chdens = dens.densities[static_cast<size_t>(channel)];
      if (static_cast<int>(chdens.size()) != d)
        throw std::invalid_argument("gen_data: need one coordinate density per dimension");
      Rng rng = Rng::derive(seed, {kDesignTag, static_cast<std::uint64_t>(channel)});
      pts.resize(dens.n, d);
      for (long i = 0; i < dens.n; ++i)
        for (int k = 0; k < d; ++k)
          pts(i, k) = chdens[static_cast<size_t>(k)].inv_cdf(rng.uniform());
    }
    return pts;
  };

  DerivativeDataset data;
  data.d = d;
  data.p = p;
  data.seed = seed;
  data.truth_hash = truth.hash();
  data.shared_design = shared_design;

  Eigen::MatrixXd shared_pts;
  if (shared_design)
    shared_pts = draw_points(0);

  std::vector<double> t(static_cast<size_t>(d));
  std::vector<int> mask(static_cast<size_t>(d), 0);
  for (int j = 0; j <= p; ++j) {
    ChannelData ch;
    ch.channel = j;
    ch.noise_scale = sigmas[static_cast<size_t>(j)];
    ch.points = shared_design ? shared_pts : draw_points(j);

    std::fill(mask.begin(), mask.end(), 0);
    if (j >= 1)
      mask[static_cast<size_t>(j - 1)] = 1;

    Rng noise = Rng::derive(seed, {kNoiseTag, static_cast<std::uint64_t>(j)});
    ch.responses.resize(ch.points.rows());
    for (long i = 0; i < ch.points.rows(); ++i) {
      for (int k = 0; k < d; ++k)
        t[static_cast<size_t>(k)] = ch.points(i, k);
      double y = truth(t, mask);
      if (ch.noise_scale > 0.0)
        y += ch.noise_scale * noise.gaussian();
      ch.responses(i) = y;
    }
    data.channels.push_back(std::move(ch));
  }
  data.validate();
  return data;
}

double l2_error(const FieldEvaluator& estimate, const FieldEvaluator& truth,
                std::span<const int> deriv_mask, int d, int quad_points_per_dim) {
  if (quad_points_per_dim < 2)
    throw std::invalid_argument("l2_error: need at least 2 quadrature points per dimension");
  if (static_cast<int>(deriv_mask.size()) != d)
    throw std::invalid_argument("l2_error: mask dimension mismatch");

  const long npd = quad_points_per_dim;
  long total = 1;
  for (int k = 0; k < d; ++k)
    total *= npd;

  std::vector<double> t(static_cast<size_t>(d));
  // compensated summation keeps the quadrature deterministic at 1e-14
  double sum = 0.0, comp = 0.0;
  for (long row = 0; row < total; ++row) {
    long rem = row;
    for (int k = d - 1; k >= 0; --k) {
      t[static_cast<size_t>(k)] = (static_cast<double>(rem % npd) + 0.5) / npd;
      rem /= npd;
    }
    const double diff = estimate(t, deriv_mask) - truth(t, deriv_mask);
    const double term = diff * diff;
    const double y = term - comp;
    const double s = sum + y;
    comp = (s - sum) - y;
    sum = s;
  }
  return sum / static_cast<double>(total);
}

} // namespace ssanova
