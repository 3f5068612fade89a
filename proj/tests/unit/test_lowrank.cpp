#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "kcg/errors.hpp"
#include "kcg/exact_gp.hpp"
#include "kcg/lowrank.hpp"
#include "support/oracles.hpp"
#include "support/problems.hpp"

namespace kcg {
namespace {

using testing::random_problem;

double min_eig(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

TEST(LowRank, CompleteDegeneracy) {
  Rng rng(1);
  const auto p = random_problem(30, 2, rng, 8, 1.0, 3.0);
  const ExactGp gp = ExactGp::fit(p.kernel, p.x, p.y, p.noise);
  const LowRankModel m = LowRankModel::fit(sor_expansion(p.kernel, p.x), p.x, p.y, p.noise, p.kernel);
  EXPECT_LT(oracle::rel_diff(m.mean(p.x_test), gp.predict_mean(p.x_test)), 1e-8);
  EXPECT_LT(oracle::rel_diff(m.cov(p.x_test, p.x_test, VarianceMode::Dtc), gp.predict_cov(p.x_test, p.x_test)), 1e-8);
  EXPECT_NEAR(m.log_evidence(), gp.log_evidence(), 1e-8 * std::abs(gp.log_evidence()));
}

TEST(LowRank, ConstantFeature) {
  Rng rng(2);
  const auto p = random_problem(12, 1, rng);
  const FeatureFn one = [](const Points& x) { return Matrix::Ones(1, x.rows()); };
  const LowRankModel m = LowRankModel::fit(FeatureExpansion(one, Matrix::Identity(1, 1)), p.x, p.y, p.noise);
  const double expected = p.y.sum() / (12.0 + p.noise);
  EXPECT_LT((m.mean(p.x_test).array() - expected).abs().maxCoeff(), 1e-14);
}

TEST(LowRank, ZeroTargets) {
  Rng rng(3);
  const auto p = random_problem(15, 2, rng);
  const Points x_u = p.x.topRows(5);
  const LowRankModel m = LowRankModel::fit(sor_expansion(p.kernel, x_u), p.x, Vector::Zero(15), p.noise);
  EXPECT_EQ(m.mean(p.x_test), Vector::Zero(p.x_test.rows()));
  // Only the determinant and constant terms remain.
  const Matrix phi = m.design();
  const Matrix sigma = m.expansion().inner();
  const double expected = -0.5 * std::log((phi * phi.transpose() / p.noise + sigma).determinant()) +
                          0.5 * std::log(sigma.determinant()) - 7.5 * std::log(2.0 * std::numbers::pi * p.noise);
  EXPECT_NEAR(m.log_evidence(), expected, 1e-10 * std::abs(expected));
}

TEST(LowRank, EvidenceMatchesDenseDensity) {
  Rng rng(4);
  const auto p = random_problem(12, 2, rng);
  const auto exp = sor_expansion(p.kernel, p.x.topRows(3));
  const LowRankModel m = LowRankModel::fit(exp, p.x, p.y, p.noise);
  Matrix c = exp.approx_gram(p.x, p.x);
  c.diagonal().array() += p.noise;
  const double ref = oracle::gaussian_log_density(c, p.y);
  EXPECT_NEAR(m.log_evidence(), ref, 1e-10 * std::abs(ref));
}

TEST(LowRank, FarFieldVariance) {
  Rng rng(5);
  const auto p = random_problem(20, 2, rng);
  const LowRankModel m = LowRankModel::fit(sor_expansion(p.kernel, p.x.topRows(6)), p.x, p.y, p.noise, p.kernel);
  const Points far = Points::Constant(1, 2, 500.0);
  EXPECT_NEAR(m.var(far, VarianceMode::Plain)[0], 0.0, 1e-14);
  EXPECT_NEAR(m.var(far, VarianceMode::Dtc)[0], p.kernel.amplitude(), 1e-12);
  EXPECT_NEAR(m.var(far, VarianceMode::DtcAsPrinted)[0], p.kernel.amplitude(), 1e-12);
}

TEST(LowRank, DtcMinusPlainIsKernelGap) {
  Rng rng(6);
  const auto p = random_problem(40, 2, rng, 25);
  const auto exp = sor_expansion(p.kernel, p.x.topRows(8));
  const LowRankModel m = LowRankModel::fit(exp, p.x, p.y, p.noise, p.kernel);
  const Vector gap = m.var(p.x_test, VarianceMode::Dtc) - m.var(p.x_test, VarianceMode::Plain);
  const Vector expected = gram_diagonal(p.kernel, p.x_test) - exp.approx_gram(p.x_test, p.x_test).diagonal();
  EXPECT_LT((gap - expected).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_GE(gap.minCoeff(), -1e-10);
}

TEST(LowRank, DtcNeedsPrior) {
  Rng rng(7);
  const auto p = random_problem(10, 1, rng);
  const LowRankModel m = LowRankModel::fit(sor_expansion(p.kernel, p.x.topRows(3)), p.x, p.y, p.noise);
  EXPECT_THROW(m.var(p.x_test, VarianceMode::Dtc), InvalidArgument);
}

TEST(Sor, CompleteInducingSetReproducesKernel) {
  Rng rng(8);
  const auto p = random_problem(15, 2, rng, 5, 1.0, 3.0);
  const auto exp = sor_expansion(p.kernel, p.x);
  EXPECT_LT(oracle::rel_diff(exp.approx_gram(p.x, p.x), gram(p.kernel, p.x)), 1e-10);
}

TEST(Sor, SingleInducingPoint) {
  Rng rng(9);
  const auto p = random_problem(10, 2, rng);
  const Points u = p.x.topRows(1);
  const Matrix g = sor_expansion(p.kernel, u).approx_gram(p.x_test, p.x);
  const Matrix expected = gram(p.kernel, p.x_test, u) * gram(p.kernel, u, p.x) / p.kernel.amplitude();
  EXPECT_LT(oracle::rel_diff(g, expected), 1e-14);
}

TEST(Sor, SymmetricPsdAndRankBounded) {
  Rng rng(10);
  const auto p = random_problem(30, 2, rng);
  const auto exp = sor_expansion(p.kernel, p.x.topRows(5));
  const Points pts = standard_normal(20, 2, rng);
  const Matrix g = exp.approx_gram(pts, pts);
  EXPECT_EQ(g, g.transpose());
  EXPECT_GE(min_eig(g), -1e-10 * p.kernel.amplitude());
  Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
  EXPECT_LE((es.eigenvalues().array() > 1e-10 * p.kernel.amplitude()).count(), 5);
}

TEST(GeneralPosterior, PriorMeanEqualToTruth) {
  Rng rng(11);
  const auto p = random_problem(8, 2, rng);
  const Kernel k = p.kernel;
  const BivariateFn mu0 = [k](const Points& a, const Points& b) { return gram(k, a, b); };
  const GeneralInducingPosterior post(k, mu0, k, p.x, standard_normal(8, 3, rng));
  EXPECT_LT(oracle::rel_diff(post.mean(p.x_test, p.x), gram(k, p.x_test, p.x)), 1e-12);
}

TEST(GeneralPosterior, IdentityDirectionsGiveSor) {
  Rng rng(12);
  const auto p = random_problem(20, 2, rng);
  const Points u = p.x.topRows(6);
  const GeneralInducingPosterior post(p.kernel, {}, p.kernel, u, Matrix::Identity(6, 6));
  EXPECT_LT(oracle::rel_diff(post.mean(p.x_test, p.x), sor_expansion(p.kernel, u).approx_gram(p.x_test, p.x)), 1e-10);
}

TEST(GeneralPosterior, ReducesToKmcgKernelForm) {
  Rng rng(13);
  const auto p = random_problem(10, 2, rng, 6);
  const Matrix s = standard_normal(10, 4, rng);
  const GeneralInducingPosterior post(p.kernel, {}, p.kernel, p.x, s);
  const Matrix kx = gram(p.kernel, p.x, p.x_test);
  const Matrix kk = gram(p.kernel, p.x);
  const Matrix expected = kx.transpose() * s * oracle::solve(Matrix(s.transpose() * kk * s), Matrix(s.transpose() * kx));
  EXPECT_LT(oracle::rel_diff(post.mean(p.x_test, p.x_test), expected), 1e-10);
}

TEST(GeneralPosterior, ObservedProjectionsHaveNoVariance) {
  Rng rng(14);
  const auto p = random_problem(5, 2, rng);
  const Matrix s = standard_normal(5, 2, rng);
  const GeneralInducingPosterior post(p.kernel, {}, p.kernel, p.x, s);
  const auto& u = p.x;
  double worst = 0.0;
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j) {
      double v = 0.0;
      for (Index m = 0; m < 5; ++m)
        for (Index n = 0; n < 5; ++n)
          for (Index a = 0; a < 5; ++a)
            for (Index b = 0; b < 5; ++b)
              v += s(m, i) * s(n, j) * s(a, i) * s(b, j) *
                   post.variance(u.row(m).transpose(), u.row(n).transpose(), u.row(a).transpose(), u.row(b).transpose());
      worst = std::max(worst, std::abs(v));
    }
  EXPECT_LE(worst, 1e-10);
}

// phi_1 = 1, phi_2 = sqrt2 cos 2 pi x, phi_3 = sqrt2 sin 2 pi x are orthonormal under U[0, 1].
Matrix trig_features(const Points& x) {
  Matrix f(3, x.rows());
  for (Index j = 0; j < x.rows(); ++j) {
    const double t = 2.0 * std::numbers::pi * x(j, 0);
    f(0, j) = 1.0;
    f(1, j) = std::sqrt(2.0) * std::cos(t);
    f(2, j) = std::sqrt(2.0) * std::sin(t);
  }
  return f;
}

Points uniform_points(Index n, Rng& rng) {
  Points x(n, 1);
  for (Index i = 0; i < n; ++i) x(i, 0) = testing::uniform(rng, 0.0, 1.0);
  return x;
}

TEST(Pbr, RecoversFiniteRankGp) {
  Rng rng(15);
  const Vector lambda = (Vector(3) << 1.0, 0.5, 0.25).finished();
  const EigenExpansion e = EigenExpansion::verified(trig_features, lambda, uniform_points, rng);
  const Points x = uniform_points(25, rng), xs = uniform_points(10, rng);
  const Vector y = standard_normal(25, 1, rng).col(0);
  const double noise = 0.05;
  Matrix c = trig_features(x).transpose() * lambda.asDiagonal() * trig_features(x);
  c.diagonal().array() += noise;
  const Vector expected = trig_features(xs).transpose() * lambda.asDiagonal() * trig_features(x) * oracle::solve(c, y);
  EXPECT_LT(oracle::rel_diff(pbr_predict(e, x, y, noise, xs), expected), 1e-8);
}

TEST(Pbr, RankOne) {
  Rng rng(16);
  const Vector lambda = (Vector(3) << 1.0, 0.5, 0.25).finished();
  const EigenExpansion e(trig_features, lambda, uniform_points);
  const Points x = uniform_points(15, rng), xs = uniform_points(4, rng);
  const Vector y = standard_normal(15, 1, rng).col(0);
  const Vector phi = trig_features(x).row(0).transpose();
  const Vector pred = pbr_predict(e.truncated(1), x, y, 0.1, xs);
  const double expected = phi.dot(y) / (phi.squaredNorm() + 0.1 / 1.0);
  EXPECT_LT((pred.array() - expected).abs().maxCoeff(), 1e-13);
}

TEST(Pbr, EigenvalueScaling) {
  Rng rng(17);
  const Vector lambda = (Vector(3) << 1.0, 0.5, 0.25).finished();
  const Points x = uniform_points(15, rng), xs = uniform_points(6, rng);
  const Vector y = standard_normal(15, 1, rng).col(0);
  const EigenExpansion scaled(trig_features, 3.0 * lambda, uniform_points);
  const LowRankModel direct = LowRankModel::fit(
      FeatureExpansion(trig_features, Matrix((3.0 * lambda).cwiseInverse().asDiagonal()), JitterPolicy::none()), x, y, 0.1);
  EXPECT_LT(oracle::rel_diff(pbr_predict(scaled, x, y, 0.1, xs), direct.mean(xs)), 1e-12);
  const EigenExpansion base(trig_features, lambda, uniform_points);
  EXPECT_LT(oracle::rel_diff(scaled.as_features().approx_gram(xs, xs), 3.0 * base.as_features().approx_gram(xs, xs)),
            1e-13);
}

TEST(EigenExpansion, RejectsBadEigenvalues) {
  EXPECT_THROW(EigenExpansion(trig_features, (Vector(3) << 1.0, -0.5, 0.1).finished(), uniform_points), InvalidArgument);
  EXPECT_THROW(EigenExpansion(trig_features, (Vector(3) << 0.1, 0.5, 1.0).finished(), uniform_points), InvalidArgument);
  Rng rng(18);
  const FeatureFn unnormalized = [](const Points& x) { return Matrix(2.0 * trig_features(x)); };
  EXPECT_THROW(EigenExpansion::verified(unnormalized, Vector::Ones(3), uniform_points, rng, 20000), InvalidArgument);
}

TEST(SeHermite, OrthonormalAndConvergent) {
  const Kernel k(KernelFamily::SquaredExponential, (Vector(2) << 1.0, 0.5).finished(), 1.5);
  const Vector centre = (Vector(2) << 0.2, -0.1).finished();
  const Vector sd = (Vector(2) << 0.8, 1.2).finished();
  const EigenExpansion e = se_hermite_expansion(k, centre, sd, 60);
  Rng rng(19);
  EXPECT_LT(e.truncated(10).orthonormality_defect(rng, 100000), 5e-2);
  for (Index i = 1; i < e.size(); ++i) EXPECT_LE(e.eigenvalues()[i], e.eigenvalues()[i - 1]);
  Points pts = standard_normal(8, 2, rng) * 0.5;
  pts.rowwise() += centre.transpose();
  EXPECT_LT(oracle::rel_diff(e.as_features().approx_gram(pts, pts), gram(k, pts)), 1e-3);
  EXPECT_THROW(se_hermite_expansion(Kernel::isotropic(KernelFamily::Matern52, 2, 1.0, 1.0), centre, sd, 5),
               InvalidArgument);
}

Matrix dense_q(const Kernel& k, const Points& x, const Points& u) {
  return gram(k, x, u) * oracle::solve(gram(k, u), Matrix(gram(k, u, x)));
}

TEST(Fitc, CompleteInducingSetIsExact) {
  Rng rng(20);
  const auto p = random_problem(25, 2, rng, 8, 1.0, 3.0);
  const ExactGp gp = ExactGp::fit(p.kernel, p.x, p.y, p.noise);
  const auto pred = fitc_predict(p.kernel, p.x, p.y, p.noise, p.x, p.x_test);
  EXPECT_LT(oracle::rel_diff(pred.mean, gp.predict_mean(p.x_test)), 1e-8);
  EXPECT_LT(oracle::rel_diff(pred.var, gp.predict_var(p.x_test)), 1e-8);
  EXPECT_NEAR(pred.log_evidence, gp.log_evidence(), 1e-8 * std::abs(gp.log_evidence()));
}

TEST(Fitc, MatchesDensePrior) {
  Rng rng(21);
  const auto p = random_problem(10, 2, rng, 5);
  const Points u = p.x.topRows(1);
  const Matrix q = dense_q(p.kernel, p.x, u);
  Matrix c = q;
  c.diagonal() = gram_diagonal(p.kernel, p.x);  // Q + diag(K - Q)
  EXPECT_LT((c.diagonal() - gram(p.kernel, p.x).diagonal()).norm(), 1e-15);
  c.diagonal().array() += p.noise;
  const auto pred = fitc_predict(p.kernel, p.x, p.y, p.noise, u, p.x_test);
  EXPECT_NEAR(pred.log_evidence, oracle::gaussian_log_density(c, p.y), 1e-10);
  const Matrix qs = gram(p.kernel, p.x_test, u) * oracle::solve(gram(p.kernel, u), Matrix(gram(p.kernel, u, p.x)));
  EXPECT_LT(oracle::rel_diff(pred.mean, qs * oracle::solve(c, p.y)), 1e-10);
  const Vector var = gram_diagonal(p.kernel, p.x_test) - (qs * oracle::solve(c, Matrix(qs.transpose()))).diagonal();
  EXPECT_LT(oracle::rel_diff(pred.var, var), 1e-10);
}

TEST(Vfe, CompleteInducingSetIsExact) {
  Rng rng(22);
  const auto p = random_problem(25, 2, rng, 8, 1.0, 3.0);
  const ExactGp gp = ExactGp::fit(p.kernel, p.x, p.y, p.noise);
  const auto pred = vfe_predict(p.kernel, p.x, p.y, p.noise, p.x, p.x_test);
  EXPECT_LT(oracle::rel_diff(pred.mean, gp.predict_mean(p.x_test)), 1e-8);
  EXPECT_NEAR(pred.log_evidence, gp.log_evidence(), 1e-8 * std::abs(gp.log_evidence()));
}

TEST(Vfe, LowerBoundAndTraceCorrection) {
  Rng rng(23);
  for (int t = 0; t < 10; ++t) {
    const auto p = random_problem(30, 2, rng);
    const Points u = p.x.topRows(6);
    const ExactGp gp = ExactGp::fit(p.kernel, p.x, p.y, p.noise);
    const auto vfe = vfe_predict(p.kernel, p.x, p.y, p.noise, u, p.x_test);
    const LowRankModel dtc = LowRankModel::fit(sor_expansion(p.kernel, u), p.x, p.y, p.noise, p.kernel);
    EXPECT_LE(vfe.log_evidence, gp.log_evidence() + 1e-10);
    EXPECT_LE(vfe.log_evidence, dtc.log_evidence() + 1e-10);
    EXPECT_LT(oracle::rel_diff(vfe.mean, dtc.mean(p.x_test)), 1e-8);
  }
}

}  // namespace
}  // namespace kcg
