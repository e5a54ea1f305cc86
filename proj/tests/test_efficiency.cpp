#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "efficiency_oracle.hpp"
#include "richness/efficiency.hpp"
#include "richness/errors.hpp"
#include "richness/fit.hpp"
#include "synthetic.hpp"

using namespace richness;

namespace {

oracle::Pmf poisson_pmf = [](const std::vector<double>& t, int x) {
  return oracle::poisson_pmf(t[0], x);
};
oracle::Pmf negbin_pmf = [](const std::vector<double>& t, int x) {
  return oracle::negbin_pmf(t[0], t[1], x);
};

std::map<int, double> nuisance_shape(int shape, int tau) {
  std::map<int, double> F;
  if (shape == 0) {
    for (int x = tau + 1; x <= tau + 31; ++x) F[x] = 1.0 / 31.0;
  } else if (shape == 1) {
    double w = 0.3, total = 0.0;
    for (int x = tau + 1; x <= tau + 200; ++x, w *= 0.7) {
      F[x] = w;
      total += w;
    }
    for (auto& [x, v] : F) v /= total;
  } else {
    F[tau + 5] = 1.0;
  }
  return F;
}

struct Check {
  double mean_err;
  double info_err;
};

Check check_identities(const Family& fam, const oracle::Pmf& pmf, const Theta& theta, double q,
                       int tau, int shape) {
  const oracle::Model model{pmf, theta.values(), q, tau};
  const auto F = nuisance_shape(shape, tau);
  const int cutoff =
      std::max<int>(F.rbegin()->first, static_cast<int>(tail_cutoff(fam, theta, 1e-16)));
  const auto law = oracle::observed_law(model, F, cutoff);
  const auto k = static_cast<Eigen::Index>(theta.size() + 1);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [x, p] : law) {
    const Eigen::VectorXd s = efficient_score(fam, theta, q, tau, static_cast<Abundance>(x));
    mean += p * s;
    info += p * s * s.transpose();
  }
  const Eigen::MatrixXd formula = fisher_information(fam, theta, q, tau);
  return {mean.cwiseAbs().maxCoeff(), (formula - info).cwiseAbs().maxCoeff()};
}

}  // namespace

TEST(Efficiency, WorkedExample) {
  const auto s = efficient_score(Family::poisson(), {1.0}, 0.5, 2, 1);
  const double e = std::exp(-1.0);
  EXPECT_NEAR(s(0), 2.0 + e / (1.0 - 0.5 * e), 1e-14);
  EXPECT_NEAR(s(0), 2.4508, 1e-4);
}

TEST(Efficiency, TailIsConstant) {
  for (const auto& [fam, theta] : std::vector<std::pair<Family, Theta>>{
           {Family::poisson(), {1.3}}, {Family::negative_binomial(), {2.0, 0.6}}}) {
    const auto a = efficient_score(fam, theta, 0.7, 4, 5);
    const auto b = efficient_score(fam, theta, 0.7, 4, 11);
    EXPECT_EQ(a, b);
  }
}

TEST(Efficiency, MatchesProjectionOracle) {
  for (const auto& [fam, pmf, theta] : std::vector<std::tuple<Family, oracle::Pmf, Theta>>{
           {Family::poisson(), poisson_pmf, {0.9}},
           {Family::poisson(), poisson_pmf, {4.0}},
           {Family::negative_binomial(), negbin_pmf, {2.0, 0.8}},
           {Family::negative_binomial(), negbin_pmf, {0.6, 0.3}}}) {
    for (int tau : {2, 3, 6}) {
      if (tau < fam.tau_min()) continue;
      const oracle::Model model{pmf, theta.values(), 0.6, tau};
      for (int x : {1, 2, tau, tau + 1, tau + 9}) {
        const auto want = oracle::efficient_score(model, x);
        const auto got = efficient_score(fam, theta, 0.6, tau, static_cast<Abundance>(x));
        for (Eigen::Index j = 0; j < want.size(); ++j)
          EXPECT_NEAR(got(j), want(j), 1e-7 * std::max(1.0, std::abs(want(j))))
              << fam.name() << " tau=" << tau << " x=" << x << " j=" << j;
      }
    }
  }
}

TEST(Efficiency, MeanZeroAndInformationIdentityPoissonGrid) {
  for (double q : {0.3, 0.6, 0.9})
    for (double theta : {0.5, 1.0, 3.0})
      for (int tau : {2, 4, 8})
        for (int shape : {0, 1, 2}) {
          const auto c = check_identities(Family::poisson(), poisson_pmf, {theta}, q, tau, shape);
          EXPECT_LT(c.mean_err, 1e-8) << q << " " << theta << " " << tau << " " << shape;
          EXPECT_LT(c.info_err, 1e-8) << q << " " << theta << " " << tau << " " << shape;
        }
}

TEST(Efficiency, MeanZeroAndInformationIdentityNegbinGrid) {
  for (double q : {0.4, 0.8})
    for (const Theta& theta : {Theta{2.0, 0.8}, Theta{0.7, 0.3}})
      for (int tau : {3, 7})
        for (int shape : {0, 1}) {
          const auto c =
              check_identities(Family::negative_binomial(), negbin_pmf, theta, q, tau, shape);
          EXPECT_LT(c.mean_err, 1e-8);
          EXPECT_LT(c.info_err, 1e-8);
        }
}

TEST(Efficiency, InformationIsSymmetricPsd) {
  const auto I = fisher_information(Family::negative_binomial(), {1.5, 0.4}, 0.7, 6);
  EXPECT_EQ(I, I.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(I);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
  const auto P = fisher_information(Family::poisson(), {1.0}, 0.9, 2);
  EXPECT_GT(P(0, 0), 0.0);
}

TEST(Efficiency, CovarianceScalesWithD) {
  const auto a = asymptotic_covariance(Family::poisson(), {1.0}, 0.6, 5, 1000);
  const auto b = asymptotic_covariance(Family::poisson(), {1.0}, 0.6, 5, 2000);
  EXPECT_EQ(a.covariance.rows(), 2);
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(a.covariance(i, j), 2.0 * b.covariance(i, j));
  EXPECT_NEAR(a.se_n * std::sqrt(2.0), b.se_n, 1e-9 * b.se_n);
}

TEST(Efficiency, CovarianceInvertsInformation) {
  const Theta theta{2.0, 0.5};
  const auto I = fisher_information(Family::negative_binomial(), theta, 0.5, 6);
  const auto c = asymptotic_covariance(Family::negative_binomial(), theta, 0.5, 6, 500);
  const Eigen::MatrixXd id = 500.0 * I * c.covariance;
  EXPECT_LT((id - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Efficiency, SingularInformationIsRejected) {
  // Rate so large that {1..tau} carries no mass: the rows for theta vanish.
  EXPECT_THROW(asymptotic_covariance(Family::poisson(), {800.0}, 0.5, 2, 100), NumericalError);
}

TEST(Efficiency, PreconditionsAreChecked) {
  EXPECT_THROW(efficient_score(Family::poisson(), {1.0}, 0.0, 2, 1), InputError);
  EXPECT_THROW(efficient_score(Family::poisson(), {1.0}, 0.5, 2, 0), InputError);
  // R(0) rounds to 1, so 1 - q R(0) = 0 at q = 1.
  EXPECT_THROW(fisher_information(Family::poisson(), {1e-300}, 1.0, 2), NumericalError);
}

TEST(Efficiency, ScoreResidualAtAndAwayFromFit) {
  const auto d = synthetic::dataset(Family::poisson(), {1.0}, 0.6, 3000, 21);
  FitOptions o;
  o.tau = 5;
  const auto r = fit_full(d, Family::poisson(), o, false);
  EXPECT_LT(score_residual(d, Family::poisson(), r.theta_hat, r.q_hat, 5), 1e-8);
  EXPECT_GT(score_residual(d, Family::poisson(), {r.theta_hat[0] + 0.1}, r.q_hat, 5), 1e-3);
}
