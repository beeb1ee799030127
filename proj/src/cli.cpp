#include "ssanova/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "ssanova/config.hpp"
#include "ssanova/errors.hpp"
#include "ssanova/kernel.hpp"
#include "ssanova/lattice.hpp"
#include "ssanova/rates.hpp"
#include "ssanova/sim.hpp"

namespace ssanova {

namespace {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("cannot open file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// all artifacts of a run are collected first and written together, so a
// failing run leaves no partial outputs
void write_artifacts(const std::string& out_dir,
                     const std::map<std::string, std::string>& files) {
  fs::create_directories(out_dir);
  for (const auto& [name, content] : files) {
    std::ofstream out(fs::path(out_dir) / name, std::ios::binary);
    if (!out)
      throw std::invalid_argument("cannot write output file '" + name + "' in '" +
                                  out_dir + "'");
    out << content;
  }
}

std::string manifest_text(const std::string& command,
                          const std::vector<std::string>& entries) {
  std::ostringstream os;
  os << "command = " << command << "\n";
  for (const std::string& e : entries)
    os << e << "\n";
  return os.str();
}

CoordinateDensity density_by_name(const std::string& name) {
  if (name == "uniform")
    return uniform_density();
  if (name.rfind("affine:", 0) == 0)
    return affine_density(std::stod(name.substr(7)));
  throw std::invalid_argument("config: unknown density '" + name +
                              "' (use 'uniform' or 'affine:<a>')");
}

double resolve_sigma(double configured, double from_dataset) {
  if (configured > 0.0)
    return configured;
  return from_dataset > 0.0 ? from_dataset : 1.0;
}

int run_simulate(const std::string& config_path, const std::string& out_dir) {
  const ConfigFile cfg = ConfigFile::load(config_path);
  check_sections(cfg, {"truth", "design", "run"});
  std::vector<std::string> manifest;

  SectionReader truth_sec(cfg, "truth", &manifest);
  TruthSpec tspec;
  tspec.d = truth_sec.get_int("d");
  tspec.r = truth_sec.get_int("r");
  tspec.m = truth_sec.get_double("m");
  tspec.cutoff = truth_sec.get_int("cutoff");
  tspec.extra_decay = truth_sec.get_double("extra_decay", 0.05);
  truth_sec.finish();

  SectionReader design(cfg, "design", &manifest);
  const std::string kind = design.get_string("kind");
  const int p = design.get_int("p");
  const std::vector<double> sigmas = design.get_double_list("sigma");
  const bool shared = design.get_bool("shared_design", true);

  DesignKind dk;
  if (kind == "lattice") {
    dk = LatticeKind{design.get_int_list("resolutions")};
  } else if (kind == "iid_uniform") {
    dk = IidUniformKind{design.get_long("n")};
  } else if (kind == "iid_density") {
    const long n = design.get_long("n");
    const std::string density = design.get_string("density", std::string("uniform"));
    IidDensityKind idk;
    idk.n = n;
    for (int j = 0; j <= p; ++j)
      idk.densities.emplace_back(static_cast<size_t>(tspec.d), density_by_name(density));
    dk = std::move(idk);
  } else {
    throw std::invalid_argument(
        "config: key 'design.kind' must be lattice, iid_uniform or iid_density");
  }
  design.finish();

  SectionReader run(cfg, "run", &manifest);
  const std::uint64_t seed = static_cast<std::uint64_t>(run.get_long("seed"));
  run.finish();

  const Truth truth = sample_truth(tspec, seed);
  const DerivativeDataset data = gen_data(truth, dk, p, sigmas, seed, shared);

  std::map<std::string, std::string> files;
  files["dataset.csv"] = serialize(data);
  files["truth.csv"] = serialize(truth);
  files["manifest.txt"] = manifest_text("simulate", manifest);
  write_artifacts(out_dir, files);
  return 0;
}

struct ModelKeys {
  double m = 2.0;
  int r = 1;
  double lambda = 0.0;
  std::string lambda_mode;
  double c = 1.0;
  double sigma0 = 0.0;
  std::vector<double> sigma;
};

ModelKeys read_model(SectionReader& sec) {
  ModelKeys keys;
  keys.m = sec.get_double("m");
  keys.r = sec.get_int("r");
  keys.lambda = sec.get_double("lambda", 0.0);
  keys.lambda_mode = sec.get_string("lambda_mode", std::string("fixed"));
  keys.c = sec.get_double("c", 1.0);
  keys.sigma0 = sec.get_double("sigma0", 0.0);
  keys.sigma = sec.get_double_list("sigma", std::vector<double>{});
  return keys;
}

FitConfig make_fit_config(const ModelKeys& keys, const DerivativeDataset& data) {
  FitConfig fc;
  fc.m = keys.m;
  fc.r = keys.r;
  fc.d = data.d;
  fc.p = data.p;
  fc.sigma0 = resolve_sigma(keys.sigma0, data.channel(0).noise_scale);
  for (int j = 1; j <= data.p; ++j) {
    const double configured =
        j - 1 < static_cast<int>(keys.sigma.size()) ? keys.sigma[static_cast<size_t>(j - 1)]
                                                    : 0.0;
    fc.sigma.push_back(resolve_sigma(configured, data.channel(j).noise_scale));
  }
  return fc;
}

double resolve_lambda(const ModelKeys& keys, long n, int d, int p) {
  if (keys.lambda_mode == "fixed")
    return keys.lambda;
  if (keys.lambda_mode == "schedule_function")
    return tune_lambda(n, keys.m, d, keys.r, p, LambdaMode::function, keys.c);
  if (keys.lambda_mode == "schedule_first_partial")
    return tune_lambda(n, keys.m, d, keys.r, p, LambdaMode::first_partial, keys.c);
  throw std::invalid_argument(
      "config: key 'model.lambda_mode' must be fixed, schedule_function or "
      "schedule_first_partial");
}

void append_resolved(std::vector<std::string>& manifest, const FitConfig& fc,
                     double lambda) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "resolved.lambda = %.17g", lambda);
  manifest.push_back(buf);
  std::snprintf(buf, sizeof(buf), "resolved.sigma0 = %.17g", fc.sigma0);
  manifest.push_back(buf);
  std::string sig = "resolved.sigma = ";
  for (size_t j = 0; j < fc.sigma.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%s%.17g", j ? "," : "", fc.sigma[j]);
    sig += buf;
  }
  manifest.push_back(sig);
}

int run_fit_lattice(const std::string& config_path, const std::string& out_dir) {
  const ConfigFile cfg = ConfigFile::load(config_path);
  check_sections(cfg, {"input", "model"});
  std::vector<std::string> manifest;

  SectionReader input(cfg, "input", &manifest);
  const std::string dataset_path = input.get_string("dataset");
  input.finish();

  SectionReader model(cfg, "model", &manifest);
  ModelKeys keys = read_model(model);
  const int cutoff = model.get_int("cutoff", 0);
  model.finish();

  const DerivativeDataset data = parse_dataset(read_file(dataset_path));
  const FitConfig fc = make_fit_config(keys, data);

  int max_res = 0;
  for (const ChannelData& ch : data.channels)
    max_res = std::max<int>(max_res, static_cast<int>(ch.n()));
  const int effective_cutoff = cutoff > 0 ? cutoff : 2 * max_res + 1;
  const BasisSpec spec(data.d, keys.r, keys.m, effective_cutoff);

  const double lambda = resolve_lambda(keys, data.channel(0).n(), data.d, data.p);
  append_resolved(manifest, fc, lambda);
  const SpectralFit fit = shrink(transform(data, spec), lambda, fc);

  std::map<std::string, std::string> files;
  files["spectral_fit.csv"] = serialize(fit);
  files["manifest.txt"] = manifest_text("fit-lattice", manifest);
  write_artifacts(out_dir, files);
  return 0;
}

int run_fit_kernel(const std::string& config_path, const std::string& out_dir) {
  const ConfigFile cfg = ConfigFile::load(config_path);
  check_sections(cfg, {"input", "model"});
  std::vector<std::string> manifest;

  SectionReader input(cfg, "input", &manifest);
  const std::string dataset_path = input.get_string("dataset");
  input.finish();

  SectionReader model(cfg, "model", &manifest);
  ModelKeys keys = read_model(model);
  const int series_cutoff = model.get_int("series_cutoff", 200);
  model.finish();

  const DerivativeDataset data = parse_dataset(read_file(dataset_path));
  const FitConfig fc = make_fit_config(keys, data);
  const double lambda = resolve_lambda(keys, data.channel(0).n(), data.d, data.p);
  append_resolved(manifest, fc, lambda);
  const KernelFit fit = fit_regularized(data, lambda, fc, series_cutoff);

  std::map<std::string, std::string> files;
  files["kernel_fit.csv"] = serialize(fit);
  files["manifest.txt"] = manifest_text("fit-kernel", manifest);
  write_artifacts(out_dir, files);
  return 0;
}

int run_rates(const std::string& config_path, const std::string& out_dir, int threads) {
  const ConfigFile cfg = ConfigFile::load(config_path);
  check_sections(cfg, {"experiment"});
  std::vector<std::string> manifest;

  SectionReader exp(cfg, "experiment", &manifest);
  RateConfig rc;
  const std::string estimator = exp.get_string("estimator");
  if (estimator == "spectral")
    rc.estimator = EstimatorKind::spectral;
  else if (estimator == "kernel")
    rc.estimator = EstimatorKind::kernel;
  else
    throw std::invalid_argument(
        "config: key 'experiment.estimator' must be spectral or kernel");

  const std::string target = exp.get_string("target");
  if (target == "function")
    rc.target.kind = TargetKind::function;
  else if (target == "first_partial")
    rc.target.kind = TargetKind::first_partial;
  else if (target == "mixed_partial")
    rc.target.kind = TargetKind::mixed_partial;
  else
    throw std::invalid_argument(
        "config: key 'experiment.target' must be function, first_partial or "
        "mixed_partial");
  rc.target.dim = exp.get_int("target_dim", 1) - 1;

  rc.m = exp.get_double("m");
  rc.d = exp.get_int("d");
  rc.r = exp.get_int("r");
  rc.p = exp.get_int("p");
  rc.n_grid = exp.get_long_list("n_grid");
  rc.replicates = exp.get_int("replicates");
  const std::string rule = exp.get_string("lambda_rule", std::string("schedule"));
  if (rule == "schedule")
    rc.lambda_rule = LambdaRule::schedule;
  else if (rule == "oracle")
    rc.lambda_rule = LambdaRule::oracle_grid;
  else
    throw std::invalid_argument(
        "config: key 'experiment.lambda_rule' must be schedule or oracle");
  rc.c = exp.get_double("c", 1.0);
  rc.lambda_grid = exp.get_double_list("lambda_grid", std::vector<double>{});
  rc.sigma0 = exp.get_double("sigma0");
  rc.sigma = exp.get_double_list("sigma", std::vector<double>{});
  rc.truth_cutoff = exp.get_int("truth_cutoff", 0);
  rc.extra_decay = exp.get_double("extra_decay", 0.05);
  rc.quad_points = exp.get_int("quad_points", 0);
  rc.slope_tol = exp.get_double("slope_tol", 0.2);
  rc.series_cutoff = exp.get_int("series_cutoff", 200);
  rc.shared_design = exp.get_bool("shared_design", true);
  rc.seed = static_cast<std::uint64_t>(exp.get_long("seed"));
  exp.finish();

  rc.threads = threads;
  manifest.push_back("run.threads = " + std::to_string(threads));

  const RateReport report = run_experiment(rc);

  std::map<std::string, std::string> files;
  files["rates.csv"] = report.to_csv();
  files["manifest.txt"] = manifest_text("rates", manifest);
  write_artifacts(out_dir, files);
  return 0;
}

int run_exponent(double m, int d, int r, int p, const std::string& target,
                 int target_dim) {
  RateTarget tg;
  if (target == "function")
    tg.kind = TargetKind::function;
  else if (target == "first_partial")
    tg.kind = TargetKind::first_partial;
  else if (target == "mixed_partial")
    tg.kind = TargetKind::mixed_partial;
  else
    throw std::invalid_argument(
        "flag '--target' must be function, first_partial or mixed_partial");
  tg.dim = target_dim - 1;

  const ExponentResult res = theoretical_exponent(m, d, r, p, tg);
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%.12g %.12g", res.exponent, res.log_power);
  std::cout << buf << "\n";
  return 0;
}

} // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Derivative-augmented smoothing-spline ANOVA regression"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".";
  int threads = 1;

  CLI::App* simulate = app.add_subcommand("simulate", "sample a truth and synthesize data");
  simulate->add_option("--config", config_path, "config file path (text; required)")
      ->required();
  simulate->add_option("--out", out_dir, "output directory (path; default '.')");

  CLI::App* fit_lattice =
      app.add_subcommand("fit-lattice", "closed-form fit on a regular lattice dataset");
  fit_lattice->add_option("--config", config_path, "config file path (text; required)")
      ->required();
  fit_lattice->add_option("--out", out_dir, "output directory (path; default '.')");

  CLI::App* fit_kernel =
      app.add_subcommand("fit-kernel", "representer fit for random designs");
  fit_kernel->add_option("--config", config_path, "config file path (text; required)")
      ->required();
  fit_kernel->add_option("--out", out_dir, "output directory (path; default '.')");

  CLI::App* rates = app.add_subcommand("rates", "convergence-rate experiment");
  rates->add_option("--config", config_path, "config file path (text; required)")
      ->required();
  rates->add_option("--out", out_dir, "output directory (path; default '.')");
  rates->add_option("--threads", threads,
                    "worker thread cap (count; default 1; output independent of N)");

  double m = 2.0;
  int d = 1, r = 1, p = 0, target_dim = 1;
  std::string target = "function";
  CLI::App* exponent =
      app.add_subcommand("exponent", "print the theoretical rate exponent and log power");
  exponent->add_option("--m", m, "smoothness order (dimensionless; default 2)");
  exponent->add_option("--d", d, "covariate count (dimensionless; default 1)");
  exponent->add_option("--r", r, "interaction order (dimensionless; default 1)");
  exponent->add_option("--p", p, "derivative channel count (dimensionless; default 0)");
  exponent->add_option("--target", target,
                       "risk target: function|first_partial|mixed_partial (default function)");
  exponent->add_option("--target-dim", target_dim,
                       "1-based dimension for first_partial (default 1)");

  std::vector<const char*> argv;
  argv.push_back("ssanova");
  for (const std::string& a : args)
    argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (simulate->parsed())
      return run_simulate(config_path, out_dir);
    if (fit_lattice->parsed())
      return run_fit_lattice(config_path, out_dir);
    if (fit_kernel->parsed())
      return run_fit_kernel(config_path, out_dir);
    if (rates->parsed())
      return run_rates(config_path, out_dir, threads);
    if (exponent->parsed())
      return run_exponent(m, d, r, p, target, target_dim);
  } catch (const DegeneracyError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i)
    args.emplace_back(argv[i]);
  return dispatch(args);
}

} // namespace ssanova
