#include "kcg/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>

#include "kcg/errors.hpp"
#include "kcg/exact_gp.hpp"
#include "kcg/harness/datasets.hpp"
#include "kcg/harness/metrics.hpp"
#include "kcg/kmcg.hpp"
#include "kcg/lowrank.hpp"
#include "kcg/solvers.hpp"
#include "kcg/structured_mvm.hpp"

namespace kcg::harness {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Oracle {
  bool available = false;
  Vector mean;
  Vector var;
  double log_evidence = kNaN;
};

struct Context {
  const ExperimentConfig& config;
  const Dataset& data;
  Kernel kernel;
  Oracle oracle;
  double y_var = kNaN;
  Index p_max = 0;
  std::shared_ptr<const MvmOperator> k_op;  // structured K over the training order, if any
};

struct Task {
  Method method;
  Index rep;
};

void score(const Context& ctx, ExperimentRecord& r, const Vector& mean, const Vector* var, std::optional<double> ev) {
  r.eps_f = ctx.oracle.available ? metric_relerr(ctx.oracle.mean, mean) : kNaN;
  r.eps_var = ctx.oracle.available && var ? metric_var_err(ctx.oracle.var, *var) : kNaN;
  r.eps_ev = ctx.oracle.available && ev ? metric_ev_err(ctx.oracle.log_evidence, *ev) : kNaN;
  r.smse = ctx.data.test_size() > 0 && ctx.y_var > 0.0 ? metric_smse(ctx.data.y_test, mean, ctx.y_var) : kNaN;
}

ExperimentRecord blank(Method m, Index step, Index budget, Index rep) {
  ExperimentRecord r;
  r.method = to_string(m);
  r.step = step;
  r.budget = budget;
  r.run = std::to_string(rep);
  r.eps_f = r.eps_var = r.eps_ev = r.smse = kNaN;
  return r;
}

ExperimentRecord failed(ExperimentRecord r, const std::exception& e) {
  r.eps_f = r.eps_var = r.eps_ev = r.smse = kNaN;
  r.reason = std::string("error: ") + e.what();
  return r;
}

CgOptions cg_options(const Context& ctx) {
  CgOptions o;
  o.relative_tolerance = ctx.config.tolerance;
  if (ctx.config.tolerance == 0.0) o.tolerance = 0.0;
  o.max_steps = ctx.p_max;
  return o;
}

std::vector<ExperimentRecord> run_exact(const Context& ctx) {
  ExperimentRecord r = blank(Method::Exact, 0, ctx.data.size(), 0);
  r.effective_p = ctx.data.size();
  if (!ctx.oracle.available) {
    r.reason = "skipped: exceeds exact limit";
    return {r};
  }
  score(ctx, r, ctx.oracle.mean, &ctx.oracle.var, ctx.oracle.log_evidence);
  r.reason = "exact";
  return {r};
}

std::vector<ExperimentRecord> run_kmcg(const Context& ctx, Index rep) {
  const auto& cfg = ctx.config;
  const Dataset& d = ctx.data;
  std::vector<ExperimentRecord> out;
  KmcgOptions opt;
  opt.inducing = cfg.kmcg_inducing;
  opt.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(rep)});
  opt.cg = cg_options(ctx);
  const Index m = cfg.kmcg_inducing < 0 ? d.size() : std::min(cfg.kmcg_inducing, d.size());
  if (m == d.size()) opt.k_m_operator = ctx.k_op;
  const auto start = Clock::now();
  std::optional<KmcgRun> run;
  try {
    run = kmcg_run_cg(ctx.kernel, d.x, d.y, opt);
  } catch (const std::exception& e) {
    for (Index p : cfg.steps) out.push_back(failed(blank(Method::Kmcg, p, m, rep), e));
    return out;
  }
  const double setup = seconds_since(start);
  const double cg_total = run->trace.step_seconds.empty() ? 0.0 : run->trace.step_seconds.back();
  for (Index p : cfg.steps) {
    ExperimentRecord r = blank(Method::Kmcg, p, m, rep);
    try {
      const Index used = std::min(p, run->trace.steps);
      const auto t0 = Clock::now();
      const KmcgModel model = KmcgModel::from_run(ctx.kernel, d.x, d.y, cfg.noise, *run, used, opt);
      const Vector mean = model.mean(d.x_test);
      const Vector var = model.var(d.x_test);
      const double ev = model.log_evidence();
      const double cg_time = used > 0 ? run->trace.step_seconds[static_cast<std::size_t>(used - 1)] : 0.0;
      r.seconds = (setup - cg_total) + cg_time + seconds_since(t0);
      score(ctx, r, mean, &var, ev);
      r.effective_p = model.steps();
      if (model.steps() < used) r.reason = "truncated";
      else if (p > run->trace.steps) r.reason = std::string(to_string(run->trace.reason));
      else r.reason = "ok";
    } catch (const std::exception& e) {
      r = failed(r, e);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ExperimentRecord> run_cg(const Context& ctx, Method method) {
  const auto& cfg = ctx.config;
  const Dataset& d = ctx.data;
  std::vector<ExperimentRecord> out;
  const auto start = Clock::now();
  std::optional<CgTrace> trace;
  Matrix cross;
  try {
    const MvmOperator a = ctx.k_op ? ctx.k_op->shifted(cfg.noise) : MvmOperator::dense(gram(ctx.kernel, d.x)).shifted(cfg.noise);
    const CgVariant variant = method == Method::CgTextbook ? CgVariant::Textbook : CgVariant::Reorthogonalized;
    trace = run_cg(variant, a, d.y, Vector::Zero(d.size()), cg_options(ctx));
    cross = gram(ctx.kernel, d.x_test, d.x);
  } catch (const std::exception& e) {
    for (Index p : cfg.steps) out.push_back(failed(blank(method, p, d.size(), 0), e));
    return out;
  }
  const double setup = seconds_since(start);
  const double cg_total = trace->step_seconds.empty() ? 0.0 : trace->step_seconds.back();
  for (Index p : cfg.steps) {
    ExperimentRecord r = blank(method, p, d.size(), 0);
    try {
      const Index used = std::min(p, trace->steps);
      const auto t0 = Clock::now();
      const Vector x = fom_solution(trace->directions.leftCols(used), trace->products.leftCols(used), d.y);
      const Vector mean = cross * x;
      const double cg_time = used > 0 ? trace->step_seconds[static_cast<std::size_t>(used - 1)] : 0.0;
      r.seconds = (setup - cg_total) + cg_time + seconds_since(t0);
      score(ctx, r, mean, nullptr, std::nullopt);
      r.effective_p = used;
      r.reason = p > trace->steps ? std::string(to_string(trace->reason)) : "ok";
    } catch (const std::exception& e) {
      r = failed(r, e);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ExperimentRecord> run_inducing(const Context& ctx, Method method, Index rep) {
  const auto& cfg = ctx.config;
  const Dataset& d = ctx.data;
  const Index n = d.size();
  std::vector<ExperimentRecord> out;
  Index m_max = 0;
  for (Index p : cfg.steps) m_max = std::max(m_max, inducing_budget(cfg, n, p));
  Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(rep)}));
  const std::vector<Index> order = sample_without_replacement(n, m_max, rng);

  std::optional<EigenExpansion> eigen;
  std::string eigen_error;
  if (method == Method::Pbr) {
    try {
      const Vector centre = d.x.colwise().mean().transpose();
      const Vector sd = ((d.x.rowwise() - centre.transpose()).array().square().colwise().mean().sqrt()).transpose();
      eigen = se_hermite_expansion(ctx.kernel, centre, sd.cwiseMax(1e-12), m_max);
    } catch (const std::exception& e) {
      eigen_error = std::string("error: ") + e.what();
    }
  }

  for (Index p : cfg.steps) {
    const Index m = inducing_budget(cfg, n, p);
    ExperimentRecord r = blank(method, p, m, rep);
    r.effective_p = m;
    if (method == Method::Pbr && !eigen) {
      r.reason = eigen_error;
      out.push_back(std::move(r));
      continue;
    }
    try {
      const auto t0 = Clock::now();
      const Points x_u = select_rows(d.x, std::vector<Index>(order.begin(), order.begin() + m));
      if (method == Method::Sor || method == Method::Dtc) {
        const LowRankModel model = LowRankModel::fit(sor_expansion(ctx.kernel, x_u), d.x, d.y, cfg.noise, ctx.kernel);
        const Vector mean = model.mean(d.x_test);
        const Vector var = model.var(d.x_test, method == Method::Dtc ? VarianceMode::Dtc : VarianceMode::Plain);
        const double ev = model.log_evidence();
        r.seconds = seconds_since(t0);
        score(ctx, r, mean, &var, ev);
      } else if (method == Method::Fitc || method == Method::Vfe) {
        const InducingPrediction pred = method == Method::Fitc
                                            ? fitc_predict(ctx.kernel, d.x, d.y, cfg.noise, x_u, d.x_test)
                                            : vfe_predict(ctx.kernel, d.x, d.y, cfg.noise, x_u, d.x_test);
        r.seconds = seconds_since(t0);
        score(ctx, r, pred.mean, &pred.var, pred.log_evidence);
      } else {
        const LowRankModel model =
            LowRankModel::fit(eigen->truncated(m).as_features(), d.x, d.y, cfg.noise, ctx.kernel, JitterPolicy::none());
        const Vector mean = model.mean(d.x_test);
        const Vector var = model.var(d.x_test, VarianceMode::Dtc);
        const double ev = model.log_evidence();
        r.seconds = seconds_since(t0);
        score(ctx, r, mean, &var, ev);
      }
      r.reason = "ok";
    } catch (const std::exception& e) {
      r = failed(r, e);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ExperimentRecord> run_task(const Context& ctx, const Task& t) {
  switch (t.method) {
    case Method::Exact:
      return run_exact(ctx);
    case Method::Kmcg:
      return run_kmcg(ctx, t.rep);
    case Method::CgTextbook:
    case Method::CgReorth:
      return run_cg(ctx, t.method);
    default:
      return run_inducing(ctx, t.method, t.rep);
  }
}

Index repetitions_for(const ExperimentConfig& cfg, Method m, Index n) {
  switch (m) {
    case Method::Exact:
    case Method::CgTextbook:
    case Method::CgReorth:
    case Method::Pbr:
      return 1;
    case Method::Kmcg:
      return cfg.kmcg_inducing < 0 || cfg.kmcg_inducing >= n ? 1 : cfg.repetitions;
    default:
      return cfg.repetitions;
  }
}

// Aggregates over repetitions for each step: mean, pointwise min and max of every finite metric.
std::vector<ExperimentRecord> aggregate(const std::vector<ExperimentRecord>& rows, Index step) {
  std::vector<const ExperimentRecord*> at;
  for (const auto& r : rows)
    if (r.step == step) at.push_back(&r);
  if (at.empty()) return {};
  std::vector<ExperimentRecord> out;
  for (const char* kind : {"mean", "min", "max"}) {
    ExperimentRecord a = *at.front();
    a.run = kind;
    a.reason = "aggregate";
    auto fold = [&](double ExperimentRecord::*field) {
      double acc = 0.0;
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      Index count = 0;
      for (const auto* r : at) {
        const double v = r->*field;
        if (!std::isfinite(v)) continue;
        acc += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        ++count;
      }
      if (count == 0) a.*field = kNaN;
      else if (kind[1] == 'e') a.*field = acc / static_cast<double>(count);
      else if (kind[1] == 'i') a.*field = lo;
      else a.*field = hi;
    };
    fold(&ExperimentRecord::eps_f);
    fold(&ExperimentRecord::eps_var);
    fold(&ExperimentRecord::eps_ev);
    fold(&ExperimentRecord::smse);
    fold(&ExperimentRecord::seconds);
    Index lo = at.front()->effective_p, hi = lo;
    double sum = 0.0;
    for (const auto* r : at) {
      lo = std::min(lo, r->effective_p);
      hi = std::max(hi, r->effective_p);
      sum += static_cast<double>(r->effective_p);
    }
    a.effective_p = kind[1] == 'e' ? static_cast<Index>(std::llround(sum / static_cast<double>(at.size())))
                                   : (kind[1] == 'i' ? lo : hi);
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace

Index inducing_budget(const ExperimentConfig& config, Index n, Index p) {
  Index m = config.fixed_m;
  if (config.budget == BudgetRule::SqrtNP) {
    const Index target = n * p;
    m = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(target))));
    while (m > 0 && (m - 1) * (m - 1) >= target) --m;
    while (m * m < target) ++m;
  }
  return std::max<Index>(1, std::min({m, config.inducing_cap, n}));
}

Dataset make_dataset(const ExperimentConfig& config) {
  const auto& src = config.dataset;
  Dataset d;
  if (src.kind == "toy") {
    ToyOptions opt;
    opt.noise = src.toy_noise;
    d = gen_toy(src.seed, opt);
  } else if (src.kind == "grid") {
    d = grid_dataset(src.grid_g, src.grid_d, config.kernel(src.grid_d), src.seed);
  } else if (src.kind == "csv") {
    d = load_csv(src.path, src.target, src.test_fraction, src.seed);
  } else if (src.kind == "sound") {
    d = load_sound_csv(src.path, config.kernel(1));
  } else if (src.kind == "file") {
    d = read_dataset(src.path);
  } else {
    throw InvalidArgument("config: unknown dataset source '" + src.kind + "'");
  }
  d.validate();
  return d;
}

std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& config, const Dataset& data) {
  config.validate();
  data.validate();
  if (data.size() == 0) throw InvalidArgument("run_experiment: empty training set");
  Context ctx{config, data, config.kernel(data.dim()), {}, kNaN, 0, nullptr};
  ctx.p_max = *std::max_element(config.steps.begin(), config.steps.end());
  ctx.y_var = population_variance(data.y);
  if (ctx.kernel.family() == KernelFamily::SquaredExponential && data.grid) {
    GridSpec spec = GridSpec::from_kernel(ctx.kernel, data.grid->axes);
    ctx.k_op = std::make_shared<const MvmOperator>(kron_operator(spec));
  } else if (data.series) {
    MaskedToeplitzSpec spec = MaskedToeplitzSpec::from_kernel(
        ctx.kernel, data.series->length,
        data.size() > 1 ? (data.x(1, 0) - data.x(0, 0)) / static_cast<double>(data.series->mask[1] - data.series->mask[0]) : 1.0,
        data.series->mask);
    ctx.k_op = std::make_shared<const MvmOperator>(masked_toeplitz_operator(spec));
  }
  if (data.size() <= config.exact_limit) {
    const ExactGp gp = ExactGp::fit(ctx.kernel, data.x, data.y, config.noise);
    ctx.oracle.available = true;
    ctx.oracle.mean = gp.predict_mean(data.x_test);
    ctx.oracle.var = gp.predict_var(data.x_test);
    ctx.oracle.log_evidence = gp.log_evidence();
  }

  std::vector<Task> tasks;
  for (Method m : config.methods)
    for (Index rep = 0; rep < repetitions_for(config, m, data.size()); ++rep) tasks.push_back({m, rep});

  std::vector<std::vector<ExperimentRecord>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) results[i] = run_task(ctx, tasks[i]);
  };
  const int threads = std::min<int>(resolve_threads(config.threads), static_cast<int>(tasks.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<ExperimentRecord> out;
  std::size_t i = 0;
  for (Method m : config.methods) {
    const Index reps = repetitions_for(config, m, data.size());
    std::vector<ExperimentRecord> rows;
    for (Index rep = 0; rep < reps; ++rep, ++i) rows.insert(rows.end(), results[i].begin(), results[i].end());
    if (reps == 1) {
      out.insert(out.end(), rows.begin(), rows.end());
      continue;
    }
    for (Index p : config.steps) {
      for (const auto& r : rows)
        if (r.step == p) out.push_back(r);
      const auto agg = aggregate(rows, p);
      out.insert(out.end(), agg.begin(), agg.end());
    }
  }
  return out;
}

std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& config) {
  return run_experiment(config, make_dataset(config));
}

}  // namespace kcg::harness
