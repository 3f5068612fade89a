#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "kcg/errors.hpp"
#include "kcg/exact_gp.hpp"
#include "kcg/harness/config.hpp"
#include "kcg/harness/datasets.hpp"
#include "kcg/harness/experiment.hpp"
#include "kcg/harness/metrics.hpp"
#include "kcg/harness/records.hpp"
#include "kcg/kmcg.hpp"
#include "kcg/structured_mvm.hpp"

namespace kcg::harness {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("kcg_test_" + std::to_string(counter_++) + "_" +
                                                  std::to_string(::testing::UnitTest::GetInstance()->random_seed()))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

const ExperimentRecord* find(const std::vector<ExperimentRecord>& rs, const std::string& method, Index step,
                             const std::string& run) {
  for (const auto& r : rs)
    if (r.method == method && r.step == step && r.run == run) return &r;
  return nullptr;
}

TEST(Toy, ShapeAndDeterminism) {
  const Dataset a = gen_toy(11);
  EXPECT_EQ(a.size(), 100);
  EXPECT_EQ(a.test_size(), 100);
  EXPECT_EQ(a.dim(), 1);
  const Dataset b = gen_toy(11);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.y_test, b.y_test);
  EXPECT_NE(gen_toy(12).y, a.y);
  EXPECT_EQ(toy_kernel().amplitude(), 2.0);
}

TEST(Toy, InputsAreHeavyTailedAroundTheClusters) {
  Points all(0, 1);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Dataset d = gen_toy(s);
    Points next(all.rows() + d.size(), 1);
    next << all, d.x;
    all = next;
  }
  const double mean = all.mean();
  const Vector c = all.col(0).array() - mean;
  const double var = c.squaredNorm() / static_cast<double>(c.size());
  const double kurt = c.array().pow(4).mean() / (var * var);
  // Narrow clusters plus a wide component give excess kurtosis.
  EXPECT_GT(kurt, 3.0);
  Index in_unit = 0;
  for (Index i = 0; i < all.rows(); ++i) in_unit += (all(i, 0) >= 0.0 && all(i, 0) <= 1.0);
  EXPECT_GT(static_cast<double>(in_unit) / static_cast<double>(all.rows()), 0.5);
}

TEST(Csv, SplitsAndShuffles) {
  TempDir dir;
  std::string text = "a,b,t\n";
  for (int i = 0; i < 10; ++i)
    text += std::to_string(i) + "," + std::to_string(2 * i) + "," + std::to_string(10 * i) + "\n";
  write_text(dir.file("d.csv"), text);
  const Dataset d = load_csv(dir.file("d.csv"), "t", 0.5, 3);
  EXPECT_EQ(d.size(), 5);
  EXPECT_EQ(d.test_size(), 5);
  EXPECT_EQ(d.dim(), 2);
  for (Index i = 0; i < d.size(); ++i) {
    EXPECT_EQ(d.x(i, 1), 2.0 * d.x(i, 0));
    EXPECT_EQ(d.y[i], 10.0 * d.x(i, 0));
  }
  const Dataset e = load_csv(dir.file("d.csv"), "t", 0.5, 3);
  EXPECT_EQ(d.x, e.x);
  EXPECT_EQ(d.x_test, e.x_test);
  double total = d.x.col(0).sum() + d.x_test.col(0).sum();
  EXPECT_EQ(total, 45.0);
}

TEST(Csv, MissingTargetNamesHeaders) {
  TempDir dir;
  write_text(dir.file("d.csv"), "alpha,beta\n1,2\n3,4\n");
  try {
    load_csv(dir.file("d.csv"), "gamma", 0.5, 1);
    FAIL() << "expected a throw";
  } catch (const InvalidArgument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("alpha"), std::string::npos);
    EXPECT_NE(msg.find("beta"), std::string::npos);
  }
}

TEST(Csv, BadCellNamesRowAndColumn) {
  TempDir dir;
  write_text(dir.file("d.csv"), "x,y\n1,2\n3,oops\n");
  try {
    load_csv(dir.file("d.csv"), "y", 0.5, 1);
    FAIL() << "expected a throw";
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find('y'), std::string::npos);
    EXPECT_NE(msg.find('3'), std::string::npos);
  }
}

TEST(DatasetFile, RoundTrip) {
  TempDir dir;
  const Dataset a = gen_toy(7);
  write_dataset(a, dir.file("toy.csv"));
  const Dataset b = read_dataset(dir.file("toy.csv"));
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.x_test, b.x_test);
  EXPECT_EQ(a.y_test, b.y_test);
}

TEST(Sound, MaskSplitsTrainAndTest) {
  TempDir dir;
  std::string text = "time,value,mask\n";
  for (int i = 0; i < 16; ++i)
    text += std::to_string(0.25 * i) + "," + std::to_string(std::sin(0.3 * i)) + "," + (i % 4 == 1 ? "0" : "1") + "\n";
  write_text(dir.file("s.csv"), text);
  const Kernel k = Kernel::isotropic(KernelFamily::Matern52, 1, 1.0, 1.0);
  const Dataset d = load_sound_csv(dir.file("s.csv"), k);
  EXPECT_EQ(d.size(), 12);
  EXPECT_EQ(d.test_size(), 4);
  ASSERT_TRUE(d.series);
  EXPECT_EQ(d.series->length, 16);
  EXPECT_EQ(d.series->observed(), 12);
}

TEST(Metrics, RelativeErrorExamples) {
  const Vector exact = (Vector(2) << 1.0, 2.0).finished();
  EXPECT_NEAR(metric_relerr(exact, (Vector(2) << 1.1, 1.8).finished()), 0.1, 1e-15);
  EXPECT_NEAR(metric_relerr(exact, 2.0 * exact), 1.0, 1e-15);
  EXPECT_EQ(metric_relerr(exact, exact), 0.0);
  EXPECT_NEAR(metric_var_err(exact, 2.0 * exact), 1.0, 1e-15);
  EXPECT_NEAR(metric_ev_err(-10.0, -11.0), 0.1, 1e-15);
}

TEST(Metrics, GuardExcludesZeros) {
  const Vector exact = (Vector(3) << 0.0, 1.0, 2.0).finished();
  const RelErr r = relerr_detail(exact, (Vector(3) << 5.0, 1.1, 2.2).finished());
  EXPECT_EQ(r.used, 2);
  EXPECT_EQ(r.excluded, 1);
  EXPECT_NEAR(r.value, 0.1, 1e-15);
  EXPECT_TRUE(std::isnan(metric_relerr(Vector::Zero(2), Vector::Ones(2))));
  EXPECT_THROW(metric_relerr(Vector::Ones(2), Vector::Ones(3)), DimensionMismatch);
}

TEST(Metrics, Smse) {
  Rng rng(1);
  const Vector y = standard_normal(20, 1, rng).col(0);
  EXPECT_EQ(metric_smse(y, y, 1.0), 0.0);
  const Vector broadcast = Vector::Constant(20, y.mean());
  EXPECT_NEAR(metric_smse(y, broadcast, population_variance(y)), 20.0, 1e-12);
  EXPECT_NEAR(population_variance((Vector(2) << 1.0, 3.0).finished()), 1.0, 1e-15);
}

TEST(Budget, SqrtRuleAndCaps) {
  ExperimentConfig c;
  EXPECT_EQ(inducing_budget(c, 100, 4), 20);
  EXPECT_EQ(inducing_budget(c, 100, 3), 18);
  EXPECT_EQ(inducing_budget(c, 10, 100), 10);
  c.inducing_cap = 15;
  EXPECT_EQ(inducing_budget(c, 100, 4), 15);
  c.budget = BudgetRule::Fixed;
  c.fixed_m = 7;
  EXPECT_EQ(inducing_budget(c, 100, 50), 7);
}

TEST(Records, HeaderOnlyWhenEmpty) {
  std::ostringstream out;
  emit_csv({}, out);
  EXPECT_EQ(out.str(), std::string(kRecordHeader) + "\n");
}

TEST(Records, RoundTrip) {
  ExperimentRecord r;
  r.method = "kmcg";
  r.step = 3;
  r.budget = 100;
  r.run = "0";
  r.eps_f = 0.1 + 0.2;
  r.eps_var = std::numeric_limits<double>::quiet_NaN();
  r.eps_ev = std::numeric_limits<double>::infinity();
  r.smse = 1e-300;
  r.seconds = 0.5;
  r.effective_p = 3;
  r.reason = "ok";
  std::stringstream io;
  emit_csv({r, r}, io);
  const auto back = read_csv(io);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].method, "kmcg");
  EXPECT_EQ(back[0].eps_f, r.eps_f);
  EXPECT_TRUE(std::isnan(back[0].eps_var));
  EXPECT_EQ(back[0].eps_ev, r.eps_ev);
  EXPECT_EQ(back[0].smse, r.smse);
  EXPECT_EQ(back[1].effective_p, 3);
  EXPECT_EQ(parse_double(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Config, ParsesIni) {
  TempDir dir;
  write_text(dir.file("c.ini"),
             "[dataset]\nsource = toy\nseed = 9\n"
             "[kernel]\nfamily = matern52\nmetric = 0.5\namplitude = 1.5\nnoise = 0.2\n"
             "[methods]\nlist = kmcg, sor, pbr\ntolerance = 0.001\n"
             "[schedule]\nsteps = 1..9:4\nbudget = fixed\nfixed_m = 12\nrepetitions = 2\nseed = 5\n"
             "[output]\npath = out.csv\nthreads = 2\n");
  const ExperimentConfig c = load_config(dir.file("c.ini"));
  EXPECT_EQ(c.dataset.seed, 9u);
  EXPECT_EQ(c.family, KernelFamily::Matern52);
  EXPECT_EQ(c.amplitude, 1.5);
  EXPECT_EQ(c.noise, 0.2);
  EXPECT_EQ(c.methods, (std::vector<Method>{Method::Kmcg, Method::Sor, Method::Pbr}));
  EXPECT_EQ(c.steps, (std::vector<Index>{1, 5, 9}));
  EXPECT_EQ(c.budget, BudgetRule::Fixed);
  EXPECT_EQ(c.fixed_m, 12);
  EXPECT_EQ(c.repetitions, 2);
  EXPECT_EQ(c.output, "out.csv");
  EXPECT_EQ(c.threads, 2);
  EXPECT_EQ(c.kernel(3).metric(), Vector::Constant(3, 0.5));
}

TEST(Config, BadValuesNameTheKey) {
  TempDir dir;
  write_text(dir.file("c.ini"), "[kernel]\nnoise = lots\n");
  try {
    load_config(dir.file("c.ini"));
    FAIL() << "expected a throw";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("kernel.noise"), std::string::npos);
  }
  write_text(dir.file("d.ini"), "[kernel]\nnoise = -1\n");
  EXPECT_THROW(load_config(dir.file("d.ini")), InvalidArgument);
}

TEST(Config, StepSchedules) {
  EXPECT_EQ(parse_steps("1,2,5"), (std::vector<Index>{1, 2, 5}));
  EXPECT_EQ(parse_steps("1..4"), (std::vector<Index>{1, 2, 3, 4}));
  EXPECT_EQ(parse_steps("10..40:10"), (std::vector<Index>{10, 20, 30, 40}));
  EXPECT_THROW(parse_steps("5..1"), InvalidArgument);
  EXPECT_THROW(parse_steps("x"), InvalidArgument);
}

TEST(Methods, NamesRoundTrip) {
  for (Method m : {Method::Exact, Method::CgTextbook, Method::CgReorth, Method::Kmcg, Method::Sor, Method::Dtc,
                   Method::Fitc, Method::Vfe, Method::Pbr})
    EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_THROW(parse_method("svgp"), InvalidArgument);
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.metric = Vector::Constant(1, 0.25);
  c.amplitude = 2.0;
  c.noise = 0.1;
  c.repetitions = 2;
  c.steps = {1, 2, 4, 8};
  return c;
}

TEST(Experiment, KmcgAtFullBudgetMatchesSor) {
  const Dataset toy = gen_toy(21);
  ExperimentConfig c = small_config();
  // A short length scale keeps K_M well conditioned at M = 6.
  c.metric = Vector::Constant(1, 25.0);
  c.methods = {Method::Kmcg, Method::Sor};
  c.budget = BudgetRule::Fixed;
  c.fixed_m = 6;
  c.kmcg_inducing = 6;
  c.steps = {6};
  c.tolerance = 0.0;
  const auto rs = run_experiment(c, toy);
  for (const char* run : {"0", "1"}) {
    const auto* k = find(rs, "kmcg", 6, run);
    const auto* s = find(rs, "sor", 6, run);
    ASSERT_TRUE(k && s) << run;
    // Both draw the same nested subset per repetition.
    EXPECT_NEAR(k->eps_f, s->eps_f, 1e-8 * s->eps_f) << run;
    EXPECT_NEAR(k->eps_ev, s->eps_ev, 1e-8 * s->eps_ev) << run;
  }
}

TEST(Experiment, NestedBaselinesImproveWithBudget) {
  const Dataset toy = gen_toy(22);
  ExperimentConfig c = small_config();
  c.methods = {Method::Sor, Method::Dtc, Method::Vfe};
  c.steps = {1, 4, 16, 64};
  c.repetitions = 1;
  const auto rs = run_experiment(c, toy);
  for (const char* m : {"sor", "dtc", "vfe"}) {
    double prev = std::numeric_limits<double>::infinity();
    for (Index p : c.steps) {
      const auto* r = find(rs, m, p, "0");
      ASSERT_TRUE(r) << m << " P=" << p;
      EXPECT_LE(r->eps_f, prev * (1.0 + 1e-9)) << m << " P=" << p;
      prev = r->eps_f;
    }
  }
}

TEST(Experiment, QuadraticFormBeatsDeterminantAtTenSteps) {
  const Dataset toy = gen_toy(23);
  const Kernel k = toy_kernel();
  const ExactGp gp = ExactGp::fit(k, toy.x, toy.y, 0.1);
  KmcgOptions o;
  o.cg.max_steps = 10;
  o.cg.tolerance = 0.0;
  const KmcgModel m = kmcg_fit(k, toy.x, toy.y, 0.1, o);
  const EvidenceTerms a = m.evidence_terms(), e = gp.evidence_terms();
  const double quad_err = std::abs(a.quadratic - e.quadratic) / std::abs(e.quadratic);
  const double det_err = std::abs(a.logdet - e.logdet) / std::abs(e.logdet);
  EXPECT_LE(quad_err, det_err);
  EXPECT_NEAR(a.log_evidence(), m.log_evidence(), 1e-12 * std::abs(m.log_evidence()));
}

TEST(Experiment, RecordsIndependentOfThreadCount) {
  const Dataset toy = gen_toy(24);
  ExperimentConfig c = small_config();
  c.methods = {Method::Exact, Method::Kmcg, Method::CgReorth, Method::Dtc, Method::Fitc};
  c.threads = 1;
  auto a = run_experiment(c, toy);
  c.threads = 3;
  auto b = run_experiment(c, toy);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i].seconds = b[i].seconds = 0.0;
    std::ostringstream x, y;
    emit_csv({a[i]}, x);
    emit_csv({b[i]}, y);
    EXPECT_EQ(x.str(), y.str()) << i;
  }
}

TEST(Experiment, AggregatesCoverRepetitions) {
  const Dataset toy = gen_toy(25);
  ExperimentConfig c = small_config();
  c.methods = {Method::Sor};
  c.steps = {2};
  c.repetitions = 3;
  const auto rs = run_experiment(c, toy);
  const auto* mean = find(rs, "sor", 2, "mean");
  const auto* lo = find(rs, "sor", 2, "min");
  const auto* hi = find(rs, "sor", 2, "max");
  ASSERT_TRUE(mean && lo && hi);
  double sum = 0.0;
  for (const char* run : {"0", "1", "2"}) sum += find(rs, "sor", 2, run)->eps_f;
  EXPECT_NEAR(mean->eps_f, sum / 3.0, 1e-14);
  EXPECT_LE(lo->eps_f, mean->eps_f);
  EXPECT_GE(hi->eps_f, mean->eps_f);
}

TEST(Experiment, ExactMethodHasZeroError) {
  const Dataset toy = gen_toy(26);
  ExperimentConfig c = small_config();
  c.methods = {Method::Exact};
  c.repetitions = 1;
  const auto rs = run_experiment(c, toy);
  ASSERT_FALSE(rs.empty());
  EXPECT_EQ(rs.front().eps_f, 0.0);
  EXPECT_EQ(rs.front().reason, "exact");
}

}  // namespace
}  // namespace kcg::harness
