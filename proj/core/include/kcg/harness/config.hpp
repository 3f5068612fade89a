#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kcg/kernels.hpp"

namespace kcg::harness {

enum class Method { Exact, CgTextbook, CgReorth, Kmcg, Sor, Dtc, Fitc, Vfe, Pbr };

std::string to_string(Method m);
/// Accepts the names printed by to_string: exact, cg-textbook, cg-reorth, kmcg, sor, dtc, fitc, vfe, pbr.
Method parse_method(const std::string& name);

enum class BudgetRule { SqrtNP, Fixed };

struct DatasetSource {
  std::string kind = "toy";  ///< toy | grid | csv | sound | file
  std::string path;
  std::string target;
  double test_fraction = 0.5;
  std::uint64_t seed = 1;
  double toy_noise = 0.1;  ///< noise variance added to toy targets
  Index grid_g = 10;
  Index grid_d = 2;
};

struct ExperimentConfig {
  DatasetSource dataset;
  KernelFamily family = KernelFamily::SquaredExponential;
  Vector metric = Vector::Constant(1, 0.25);  ///< broadcast when it has one entry
  double amplitude = 2.0;
  double noise = 0.1;
  std::vector<Method> methods{Method::Kmcg, Method::CgReorth, Method::Sor, Method::Dtc, Method::Fitc, Method::Vfe};
  std::vector<Index> steps{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  BudgetRule budget = BudgetRule::SqrtNP;
  Index fixed_m = 10;
  Index repetitions = 10;
  std::uint64_t seed = 42;
  Index inducing_cap = 500;
  /// KMCG inducing count; negative means M = N.
  Index kmcg_inducing = -1;
  /// Residual threshold as a fraction of |b| for KMCG and CG.
  double tolerance = 0.01;
  /// The exact oracle is skipped above this many training points.
  Index exact_limit = 5000;
  std::string output = "results.csv";
  int threads = 1;

  /// The kernel with the metric broadcast to `dim` inputs.
  Kernel kernel(Index dim) const;
  /// Throws InvalidArgument on any out-of-range field.
  void validate() const;
};

/// Reads an INI file with sections [dataset], [kernel], [methods], [schedule], [output].
/// Malformed values raise InvalidArgument naming the key.
ExperimentConfig load_config(const std::string& path);
/// Parses "1,2,5" and ranges such as "1..10" or "1..100:10" (first..last:stride).
std::vector<Index> parse_steps(const std::string& text);
/// Applies KCG_THREADS from the environment when it holds a positive integer.
int resolve_threads(int configured);

}  // namespace kcg::harness
