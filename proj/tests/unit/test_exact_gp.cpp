#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "kcg/errors.hpp"
#include "kcg/exact_gp.hpp"
#include "kcg/harness/datasets.hpp"
#include "kcg/lowrank.hpp"
#include "support/oracles.hpp"
#include "support/problems.hpp"

namespace kcg {
namespace {

TEST(ExactGp, ScalarCase) {
  const Kernel k = Kernel::isotropic(KernelFamily::SquaredExponential, 1, 1.0, 2.0);
  const Points x = Points::Constant(1, 1, 0.3);
  const Vector y = Vector::Constant(1, 1.5);
  const ExactGp gp = ExactGp::fit(k, x, y, 0.5);
  EXPECT_NEAR(gp.weights()[0], 1.5 / 2.5, 1e-15);
  const Points xs = Points::Constant(1, 1, 1.3);
  EXPECT_NEAR(gp.predict_mean(xs)[0], eval(k, xs.row(0), x.row(0)) * 1.5 / 2.5, 1e-15);
  const double expected = -0.5 * 1.5 * 1.5 / 2.5 - 0.5 * std::log(2.5) - 0.5 * std::log(2.0 * std::numbers::pi);
  EXPECT_NEAR(gp.log_evidence(), expected, 1e-14);
}

TEST(ExactGp, WeightsResidual) {
  Rng rng(1);
  const auto p = testing::random_problem(50, 2, rng);
  const ExactGp gp = ExactGp::fit(p.kernel, p.x, p.y, p.noise);
  Matrix c = gram(p.kernel, p.x);
  c.diagonal().array() += p.noise;
  EXPECT_LE((c * gp.weights() - p.y).norm(), 1e-10 * p.y.norm());
}

TEST(ExactGp, ToyFitsWithoutJitter) {
  const Dataset toy = harness::gen_toy(3);
  ASSERT_EQ(toy.size(), 100);
  const ExactGp gp = ExactGp::fit(harness::toy_kernel(), toy.x, toy.y, 0.1);
  EXPECT_EQ(gp.factor().jitter(), 0.0);
}

TEST(ExactGp, InterpolatesWithTinyNoise) {
  Rng rng(2);
  const Kernel k = Kernel::isotropic(KernelFamily::SquaredExponential, 1, 1.0, 1.0);
  const Points x = Vector::LinSpaced(6, 0.0, 7.5);
  const Vector y = standard_normal(6, 1, rng).col(0);
  const ExactGp gp = ExactGp::fit(k, x, y, 1e-12);
  EXPECT_LT((gp.predict_mean(x) - y).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(ExactGp, MatchesEliminationOracle) {
  Rng rng(3);
  const auto p = testing::random_problem(20, 2, rng, 10);
  const ExactGp gp = ExactGp::fit(p.kernel, p.x, p.y, p.noise);
  const auto ref = oracle::gp(p.kernel, p.x, p.y, p.noise, p.x_test);
  EXPECT_LT(oracle::rel_diff(gp.predict_mean(p.x_test), ref.mean), 1e-10);
  EXPECT_LT(oracle::rel_diff(gp.predict_cov(p.x_test, p.x_test), ref.cov), 1e-10);
  EXPECT_LT(oracle::rel_diff(gp.predict_var(p.x_test), ref.cov.diagonal()), 1e-10);
}

TEST(ExactGp, FarFieldVarianceIsPrior) {
  Rng rng(4);
  const auto p = testing::random_problem(15, 2, rng);
  const ExactGp gp = ExactGp::fit(p.kernel, p.x, p.y, p.noise);
  const Points far = Points::Constant(1, 2, 1e3);
  EXPECT_NEAR(gp.predict_cov(far, far)(0, 0), p.kernel.amplitude(), 1e-12);
  EXPECT_GE(gp.predict_var(p.x_test).minCoeff(), -1e-10);
}

TEST(ExactGp, EvidenceMatchesCofactorDensity) {
  Rng rng(5);
  const auto p = testing::random_problem(6, 2, rng);
  const ExactGp gp = ExactGp::fit(p.kernel, p.x, p.y, p.noise);
  Matrix c = oracle::naive_gram(p.kernel, p.x, p.x);
  c.diagonal().array() += p.noise;
  const double quad = p.y.dot(oracle::solve(c, p.y));
  const double expected = -0.5 * quad - 0.5 * std::log(oracle::cofactor_det(c)) - 3.0 * std::log(2.0 * std::numbers::pi);
  EXPECT_NEAR(gp.log_evidence(), expected, 1e-12 * std::abs(expected));
}

TEST(ExactGp, EvidencePermutationInvariant) {
  Rng rng(6);
  const auto p = testing::random_problem(25, 2, rng);
  const auto perm = random_permutation(25, rng);
  const ExactGp a = ExactGp::fit(p.kernel, p.x, p.y, p.noise);
  Vector yp(25);
  for (Index i = 0; i < 25; ++i) yp[i] = p.y[perm[static_cast<std::size_t>(i)]];
  const ExactGp b = ExactGp::fit(p.kernel, select_rows(p.x, perm), yp, p.noise);
  EXPECT_NEAR(a.log_evidence(), b.log_evidence(), 1e-10 * std::abs(a.log_evidence()));
}

TEST(ExactGp, EvidenceDropsWhenTargetsScaled) {
  const Dataset toy = harness::gen_toy(4);
  const ExactGp a = ExactGp::fit(harness::toy_kernel(), toy.x, toy.y, 0.1);
  const ExactGp b = ExactGp::fit(harness::toy_kernel(), toy.x, 10.0 * toy.y, 0.1);
  EXPECT_LT(b.log_evidence(), a.log_evidence());
}

TEST(ExactGp, CompleteFeatureDegeneracy) {
  Rng rng(7);
  const auto p = testing::random_problem(30, 2, rng, 8, 1.0, 3.0);
  const ExactGp gp = ExactGp::fit(p.kernel, p.x, p.y, p.noise);
  const LowRankModel lr = LowRankModel::fit(sor_expansion(p.kernel, p.x), p.x, p.y, p.noise);
  EXPECT_LT(oracle::rel_diff(lr.mean(p.x_test), gp.predict_mean(p.x_test)), 1e-8);
}

TEST(ExactGp, RejectsBadInput) {
  const Kernel k = Kernel::isotropic(KernelFamily::SquaredExponential, 1, 1.0, 1.0);
  EXPECT_THROW(ExactGp::fit(k, Points::Zero(2, 1), Vector::Zero(2), 0.0), InvalidArgument);
  EXPECT_THROW(ExactGp::fit(k, Points::Zero(0, 1), Vector::Zero(0), 0.1), InvalidArgument);
  EXPECT_THROW(ExactGp::fit(k, Points::Zero(2, 1), Vector::Zero(3), 0.1), DimensionMismatch);
}

}  // namespace
}  // namespace kcg
