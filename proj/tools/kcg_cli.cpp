// kcg: dataset generation, experiment runs and metric evaluation.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kcg/harness/config.hpp"
#include "kcg/harness/datasets.hpp"
#include "kcg/harness/experiment.hpp"
#include "kcg/harness/metrics.hpp"
#include "kcg/harness/records.hpp"
#include "kcg/structured_mvm.hpp"

namespace {

using namespace kcg;
using namespace kcg::harness;

// One number per line; a leading non-numeric line is taken as a header.
Vector read_column(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<double> values;
  std::string line;
  Index row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      values.push_back(parse_double(line));
    } catch (const std::exception&) {
      if (row == 1) continue;
      throw std::runtime_error(path + ":" + std::to_string(row) + ": not a number: '" + line + "'");
    }
  }
  Vector out(static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) out[static_cast<Index>(i)] = values[i];
  return out;
}

struct KernelArgs {
  std::string family = "se";
  std::vector<double> metric{1.0};
  double amplitude = 1.0;

  Kernel build(Index dim) const {
    Vector m(dim);
    if (metric.size() == 1) {
      m.setConstant(metric[0]);
    } else if (static_cast<Index>(metric.size()) == dim) {
      for (Index i = 0; i < dim; ++i) m[i] = metric[static_cast<std::size_t>(i)];
    } else {
      throw std::runtime_error("--metric needs 1 or " + std::to_string(dim) + " values");
    }
    return Kernel(parse_kernel_family(family), m, amplitude);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel machine conjugate gradients: datasets, experiments and metrics"};
  app.require_subcommand(1);

  auto* toy = app.add_subcommand("gen-toy", "Write the 1-D toy dataset");
  std::uint64_t toy_seed = 1;
  std::string toy_out;
  ToyOptions toy_opts;
  toy->add_option("--seed", toy_seed, "Generator seed")->capture_default_str();
  toy->add_option("--train", toy_opts.train, "Training points")->capture_default_str();
  toy->add_option("--test", toy_opts.test, "Test points")->capture_default_str();
  toy->add_option("--noise", toy_opts.noise, "Noise variance added to the targets")->capture_default_str();
  toy->add_option("-o,--out", toy_out, "Output dataset file")->required();

  auto* grid = app.add_subcommand("gen-grid", "Write a perturbed product-grid dataset");
  Index grid_g = 10, grid_d = 2;
  std::uint64_t grid_seed = 1;
  std::string grid_out;
  KernelArgs grid_kernel;
  GridOptions grid_opts;
  grid->add_option("-g,--points-per-axis", grid_g, "Points per axis (G)")->capture_default_str();
  grid->add_option("-d,--dims", grid_d, "Dimensions (D)")->capture_default_str();
  grid->add_option("--seed", grid_seed, "Generator seed")->capture_default_str();
  grid->add_option("--metric", grid_kernel.metric, "Kernel precision, one value or one per axis");
  grid->add_option("--amplitude", grid_kernel.amplitude, "Kernel amplitude")->capture_default_str();
  grid->add_option("--axis-noise-sd", grid_opts.axis_noise_sd, "Axis coordinate perturbation sd")->capture_default_str();
  grid->add_option("--test-points", grid_opts.test_points, "Uniform test inputs")->capture_default_str();
  grid->add_option("-o,--out", grid_out, "Output dataset file")->required();

  auto* run = app.add_subcommand("run", "Run an experiment from a config file and write records");
  std::string config_path;
  std::optional<std::string> run_out;
  std::optional<int> run_threads;
  std::optional<std::string> run_steps;
  std::optional<std::uint64_t> run_seed;
  run->add_option("config", config_path, "INI config file")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--out", run_out, "Override output.path ('-' for stdout)");
  run->add_option("-j,--threads", run_threads, "Override output.threads");
  run->add_option("--steps", run_steps, "Override schedule.steps");
  run->add_option("--seed", run_seed, "Override schedule.seed");

  auto* metrics = app.add_subcommand("metrics", "Compare an approximation with a reference column file");
  std::string exact_path, approx_path, kind = "relerr";
  std::optional<double> ref_var;
  metrics->add_option("--exact", exact_path, "Reference values (test targets for smse)")->required()->check(CLI::ExistingFile);
  metrics->add_option("--approx", approx_path, "Approximate values")->required()->check(CLI::ExistingFile);
  metrics->add_option("--kind", kind, "relerr | var | ev | smse")
      ->check(CLI::IsMember({"relerr", "var", "ev", "smse"}))
      ->capture_default_str();
  metrics->add_option("--ref-var", ref_var, "Reference variance for smse (default: variance of --exact)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*toy) {
      write_dataset(gen_toy(toy_seed, toy_opts), toy_out);
    } else if (*grid) {
      const Dataset ds = grid_dataset(grid_g, grid_d, grid_kernel.build(grid_d), grid_seed, grid_opts);
      write_dataset(ds, grid_out);
      std::cerr << "wrote " << ds.size() << " grid points and " << ds.test_size() << " test points\n";
    } else if (*run) {
      ExperimentConfig cfg = load_config(config_path);
      if (run_out) cfg.output = *run_out;
      if (run_threads) cfg.threads = *run_threads;
      if (run_steps) cfg.steps = parse_steps(*run_steps);
      if (run_seed) cfg.seed = *run_seed;
      cfg.threads = resolve_threads(cfg.threads);
      cfg.validate();
      const auto records = run_experiment(cfg);
      if (cfg.output == "-") {
        emit_csv(records, std::cout);
      } else {
        emit_csv(records, cfg.output);
        std::cerr << "wrote " << records.size() << " records to " << cfg.output << "\n";
      }
    } else if (*metrics) {
      const Vector exact = read_column(exact_path);
      const Vector approx = read_column(approx_path);
      double value = 0.0;
      if (kind == "relerr") {
        const RelErr r = relerr_detail(exact, approx);
        value = r.value;
        if (r.excluded > 0) std::cerr << r.excluded << " points excluded by the relative-error guard\n";
      } else if (kind == "var") {
        value = metric_var_err(exact, approx);
      } else if (kind == "ev") {
        if (exact.size() != 1 || approx.size() != 1) throw std::runtime_error("ev expects one value per file");
        value = metric_ev_err(exact[0], approx[0]);
      } else {
        value = metric_smse(exact, approx, ref_var ? *ref_var : population_variance(exact));
      }
      std::cout << format_double(value) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "kcg: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
