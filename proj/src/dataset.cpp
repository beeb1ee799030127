#include "ssanova/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace ssanova {

namespace {

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s, const char* what) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size())
      throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("dataset: bad numeric field for ") + what +
                                ": '" + s + "'");
  }
}

} // namespace

void DerivativeDataset::validate() const {
  if (d < 1)
    throw std::invalid_argument("dataset: dimension must be >= 1");
  if (p < 0 || p > d)
    throw std::invalid_argument("dataset: need 0 <= p <= d");
  if (static_cast<int>(channels.size()) != p + 1)
    throw std::invalid_argument("dataset: channel count does not match p+1");
  for (int j = 0; j <= p; ++j) {
    const ChannelData& ch = channels[static_cast<size_t>(j)];
    if (ch.channel != j)
      throw std::invalid_argument("dataset: channels out of order");
    if (ch.points.cols() != d)
      throw std::invalid_argument("dataset: channel point dimension mismatch");
    if (ch.responses.size() != ch.points.rows())
      throw std::invalid_argument("dataset: response count does not match point count");
    if (ch.row_noise_scale.size() != 0 && ch.row_noise_scale.size() != ch.points.rows())
      throw std::invalid_argument("dataset: per-row noise scale length mismatch");
    for (long i = 0; i < ch.points.rows(); ++i)
      for (int k = 0; k < d; ++k) {
        const double t = ch.points(i, k);
        if (!(t >= -1e-12 && t <= 1.0 + 1e-12))
          throw std::invalid_argument("dataset: design point outside [0,1]^d");
      }
  }
}

std::string serialize(const DerivativeDataset& data) {
  data.validate();
  bool have_row_sigma = false;
  for (const ChannelData& ch : data.channels)
    if (ch.row_noise_scale.size() > 0)
      have_row_sigma = true;

  std::ostringstream os;
  os << "# dataset d=" << data.d << " p=" << data.p << " seed=" << data.seed
     << " shared_design=" << (data.shared_design ? 1 : 0) << " sigma=";
  for (int j = 0; j <= data.p; ++j)
    os << (j ? "," : "") << fmt_double(data.channels[static_cast<size_t>(j)].noise_scale);
  os << " truth_hash=" << (data.truth_hash.empty() ? "-" : data.truth_hash) << "\n";

  os << "channel";
  for (int k = 1; k <= data.d; ++k)
    os << ",t" << k;
  os << ",y";
  if (have_row_sigma)
    os << ",row_sigma";
  os << "\n";

  for (const ChannelData& ch : data.channels)
    for (long i = 0; i < ch.n(); ++i) {
      os << ch.channel;
      for (int k = 0; k < data.d; ++k)
        os << "," << fmt_double(ch.points(i, k));
      os << "," << fmt_double(ch.responses(i));
      if (have_row_sigma)
        os << ","
           << fmt_double(ch.row_noise_scale.size() > 0 ? ch.row_noise_scale(i)
                                                       : ch.noise_scale);
      os << "\n";
    }
  return os.str();
}

DerivativeDataset parse_dataset(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind("# dataset ", 0) != 0)
    throw std::invalid_argument("dataset: missing '# dataset' header line");

  DerivativeDataset out;
  std::vector<double> sigmas;
  for (const std::string& tok : split(line.substr(2), ' ')) {
    auto eq = tok.find('=');
    if (eq == std::string::npos)
      continue;
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "d")
      out.d = static_cast<int>(to_double(val, "d"));
    else if (key == "p")
      out.p = static_cast<int>(to_double(val, "p"));
    else if (key == "seed")
      out.seed = static_cast<std::uint64_t>(std::stoull(val));
    else if (key == "shared_design")
      out.shared_design = val != "0";
    else if (key == "sigma")
      for (const std::string& s : split(val, ','))
        sigmas.push_back(to_double(s, "sigma"));
    else if (key == "truth_hash")
      out.truth_hash = (val == "-") ? "" : val;
  }
  if (out.d < 1 || out.p < 0 || static_cast<int>(sigmas.size()) != out.p + 1)
    throw std::invalid_argument("dataset: inconsistent header");

  if (!std::getline(is, line))
    throw std::invalid_argument("dataset: missing column header");
  const bool have_row_sigma = line.find(",row_sigma") != std::string::npos;

  std::vector<std::vector<double>> pts(static_cast<size_t>(out.p) + 1);
  std::vector<std::vector<double>> ys(static_cast<size_t>(out.p) + 1);
  std::vector<std::vector<double>> rsig(static_cast<size_t>(out.p) + 1);
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#')
      continue;
    const auto f = split(line, ',');
    const size_t expect = 2 + static_cast<size_t>(out.d) + (have_row_sigma ? 1 : 0);
    if (f.size() != expect)
      throw std::invalid_argument("dataset: wrong column count in row '" + line + "'");
    const int ch = static_cast<int>(to_double(f[0], "channel"));
    if (ch < 0 || ch > out.p)
      throw std::invalid_argument("dataset: channel id out of range");
    const size_t c = static_cast<size_t>(ch);
    for (int k = 0; k < out.d; ++k)
      pts[c].push_back(to_double(f[static_cast<size_t>(1 + k)], "coordinate"));
    ys[c].push_back(to_double(f[static_cast<size_t>(1 + out.d)], "response"));
    if (have_row_sigma)
      rsig[c].push_back(to_double(f.back(), "row_sigma"));
  }

  for (int j = 0; j <= out.p; ++j) {
    const size_t c = static_cast<size_t>(j);
    const long n = static_cast<long>(ys[c].size());
    ChannelData chd;
    chd.channel = j;
    chd.noise_scale = sigmas[c];
    chd.points.resize(n, out.d);
    chd.responses.resize(n);
    for (long i = 0; i < n; ++i) {
      for (int k = 0; k < out.d; ++k)
        chd.points(i, k) = pts[c][static_cast<size_t>(i) * out.d + static_cast<size_t>(k)];
      chd.responses(i) = ys[c][static_cast<size_t>(i)];
    }
    if (have_row_sigma) {
      chd.row_noise_scale.resize(n);
      for (long i = 0; i < n; ++i)
        chd.row_noise_scale(i) = rsig[c][static_cast<size_t>(i)];
    }
    out.channels.push_back(std::move(chd));
  }
  out.validate();
  return out;
}

CoordinateDensity uniform_density() {
  CoordinateDensity d;
  d.name = "uniform";
  d.pdf = [](double) { return 1.0; };
  d.cdf = [](double t) { return t; };
  d.inv_cdf = [](double x) { return x; };
  return d;
}

CoordinateDensity affine_density(double a) {
  if (!(a > 0.0 && a < 2.0))
    throw std::invalid_argument("affine_density: slope parameter must lie in (0,2)");
  CoordinateDensity d;
  d.name = "affine:" + std::to_string(a);
  d.pdf = [a](double t) { return a + 2.0 * (1.0 - a) * t; };
  d.cdf = [a](double t) { return a * t + (1.0 - a) * t * t; };
  d.inv_cdf = [a](double x) {
    if (std::abs(1.0 - a) < 1e-14)
      return x;
    const double b = 1.0 - a;
    // positive root of b t^2 + a t - x = 0
    return (-a + std::sqrt(a * a + 4.0 * b * x)) / (2.0 * b);
  };
  return d;
}

} // namespace ssanova
