#pragma once

#include <string>
#include <vector>

#include "kcg/dataset.hpp"
#include "kcg/harness/config.hpp"

namespace kcg::harness {

struct ExperimentRecord {
  std::string method;
  Index step = 0;
  Index budget = 0;
  std::string run;  ///< repetition number, or mean | min | max for aggregates
  double eps_f = 0.0;
  double eps_var = 0.0;
  double eps_ev = 0.0;
  double smse = 0.0;
  double seconds = 0.0;
  Index effective_p = 0;
  std::string reason;
};

/// Inducing budget for step P: ceil(sqrt(N P)) or the fixed M, capped by the inducing cap and N.
Index inducing_budget(const ExperimentConfig& config, Index n, Index p);

/// Builds the dataset named by the config.
Dataset make_dataset(const ExperimentConfig& config);

/// Runs every configured method at every scheduled step against the exact
/// oracle. Failures of one method are recorded in its rows. The record list
/// depends only on the config and dataset, not on the thread count.
std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& config, const Dataset& data);
std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& config);

}  // namespace kcg::harness
