#include "richness/efficiency.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "richness/errors.hpp"

namespace richness {

namespace {

constexpr double kMaxCondition = 1e12;

// Model quantities shared by the scores and the information.
struct Pieces {
  int k = 0;
  double q = 0.0;
  double r0 = 0.0;
  double head = 0.0;  // sum_{0..tau} R
  Eigen::VectorXd dr0;
  Eigen::VectorXd dhead;  // sum_{0..tau} grad R
  std::vector<double> mass;                // R(0..tau)
  std::vector<Eigen::VectorXd> dlog;       // grad log R(0..tau)
};

Pieces pieces(const Family& family, const Theta& theta, double q, int tau) {
  check_domain(family, theta);
  if (tau < 1) throw InputError("tau must be >= 1");
  if (!(q > 0.0 && q <= 1.0)) throw InputError("q must lie in (0, 1]");
  Pieces p;
  p.k = static_cast<int>(family.param_dim());
  p.q = q;
  const auto lr = log_range(family, theta, tau, true);
  p.dr0 = Eigen::VectorXd::Zero(p.k);
  p.dhead = Eigen::VectorXd::Zero(p.k);
  for (int x = 0; x <= tau; ++x) {
    const double m = std::exp(lr.log_mass[x]);
    Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(lr.grad_log[x].data(), p.k);
    p.mass.push_back(m);
    p.head += m;
    p.dhead += m * g;
    p.dlog.push_back(std::move(g));
  }
  p.r0 = p.mass[0];
  p.dr0 = p.r0 * p.dlog[0];
  if (!(1.0 - q * p.r0 > 0.0) || !(1.0 - q * p.head > 0.0))
    throw NumericalError("singular configuration: q * sum_{0..tau} R >= 1");
  return p;
}

Eigen::VectorXd score_at(const Pieces& p, int tau, Abundance x) {
  Eigen::VectorXd s(p.k + 1);
  const double zero_q = p.r0 / (1.0 - p.q * p.r0);
  const Eigen::VectorXd zero_t = p.q * p.dr0 / (1.0 - p.q * p.r0);
  if (x <= static_cast<Abundance>(tau)) {
    s(0) = 1.0 / p.q + zero_q;
    s.tail(p.k) = p.dlog[x] + zero_t;
  } else {
    const double tail = 1.0 - p.q * p.head;
    s(0) = -p.head / tail + zero_q;
    s.tail(p.k) = -p.q * p.dhead / tail + zero_t;
  }
  return s;
}

}  // namespace

Eigen::VectorXd efficient_score(const Family& family, const Theta& theta, double q,
                                int tau, Abundance x) {
  if (x == 0) throw InputError("efficient score is defined for x >= 1");
  return score_at(pieces(family, theta, q, tau), tau, x);
}

Eigen::MatrixXd fisher_information(const Family& family, const Theta& theta,
                                   double q, int tau) {
  const Pieces p = pieces(family, theta, q, tau);
  const double a = 1.0 - q * p.r0;
  const double b = 1.0 - q * p.head;
  const double rare = p.head - p.r0;
  const Eigen::VectorXd drare = p.dhead - p.dr0;

  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(p.k, p.k);
  for (int x = 1; x <= tau; ++x) outer += p.mass[x] * p.dlog[x] * p.dlog[x].transpose();

  Eigen::MatrixXd info(p.k + 1, p.k + 1);
  info(0, 0) = (rare / q + p.head * p.head / b - p.r0 * p.r0 / a) / a;
  const Eigen::VectorXd cross =
      q / a * (drare / q + p.head * p.dhead / b - p.dr0 * p.r0 / a);
  info.block(1, 0, p.k, 1) = cross;
  info.block(0, 1, 1, p.k) = cross.transpose();
  info.block(1, 1, p.k, p.k) =
      q / a *
      (outer + q * p.dhead * p.dhead.transpose() / b - q * p.dr0 * p.dr0.transpose() / a);
  const Eigen::MatrixXd sym = 0.5 * (info + info.transpose());
  return sym;
}

double score_residual(const CountData& data, const Family& family,
                      const Theta& theta, double q, int tau) {
  if (data.empty()) throw InputError("empty dataset");
  const Pieces p = pieces(family, theta, q, tau);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(p.k + 1);
  double abundant = 0.0;
  for (const auto& [x, nx] : data.frequencies()) {
    if (x > static_cast<Abundance>(tau))
      abundant += static_cast<double>(nx);
    else
      total += static_cast<double>(nx) * score_at(p, tau, x);
  }
  if (abundant > 0.0) total += abundant * score_at(p, tau, static_cast<Abundance>(tau) + 1);
  return total.cwiseAbs().maxCoeff() / static_cast<double>(data.distinct());
}

AsymptoticCovariance asymptotic_covariance(const Family& family, const Theta& theta,
                                           double q, int tau, Frequency d) {
  if (d == 0) throw InputError("covariance needs d > 0");
  const Eigen::MatrixXd info = fisher_information(family, theta, q, tau);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.cwiseAbs().maxCoeff();
  if (!(lo > 0.0) || !(hi / lo < kMaxCondition))
    throw NumericalError("efficient information is singular (condition number " +
                         (lo > 0.0 ? std::to_string(hi / lo) : std::string("inf")) + ")");
  AsymptoticCovariance out;
  out.condition = hi / lo;
  const Eigen::MatrixXd inv =
      eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  const double dd = static_cast<double>(d);
  out.covariance = inv / dd;

  const Pieces p = pieces(family, theta, q, tau);
  const double a = 1.0 - q * p.r0;
  Eigen::VectorXd grad(p.k + 1);
  grad(0) = dd * p.r0 / (a * a);
  grad.tail(p.k) = dd * q * p.dr0 / (a * a);
  out.se_n = std::sqrt(grad.dot(out.covariance * grad));
  return out;
}

}  // namespace richness
