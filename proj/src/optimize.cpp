#include "optimize.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <limits>

#include "richness/errors.hpp"

namespace richness::detail {

namespace {

double to_u(Coord c, double theta) {
  switch (c) {
    case Coord::log:
      return std::log(theta);
    case Coord::logit:
      return std::log(theta) - std::log1p(-theta);
    case Coord::linear:
      return theta;
  }
  return theta;
}

double from_u(Coord c, double u) {
  switch (c) {
    case Coord::log:
      return std::exp(u);
    case Coord::logit:
      return 1.0 / (1.0 + std::exp(-u));
    case Coord::linear:
      return u;
  }
  return u;
}

double dtheta_du(Coord c, double theta) {
  switch (c) {
    case Coord::log:
      return theta;
    case Coord::logit:
      return theta * (1.0 - theta);
    case Coord::linear:
      return 1.0;
  }
  return 1.0;
}

class Search {
 public:
  explicit Search(const BoxProblem& p) : p_(p), k_(p.coords.size()) {
    lo_.resize(static_cast<Eigen::Index>(k_));
    hi_.resize(static_cast<Eigen::Index>(k_));
    for (std::size_t i = 0; i < k_; ++i) {
      lo_[idx(i)] = to_u(p.coords[i], p.bounds[i].lo);
      hi_[idx(i)] = to_u(p.coords[i], p.bounds[i].hi);
    }
  }

  static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

  Theta theta(const Eigen::VectorXd& u) const {
    std::vector<double> v(k_);
    for (std::size_t i = 0; i < k_; ++i) v[i] = from_u(p_.coords[i], u[idx(i)]);
    return Theta(std::move(v));
  }

  Eigen::VectorXd u_of(const Theta& t) const {
    Eigen::VectorXd u(idx(k_));
    for (std::size_t i = 0; i < k_; ++i) u[idx(i)] = to_u(p_.coords[i], t[i]);
    return clamp(u);
  }

  Eigen::VectorXd clamp(Eigen::VectorXd u) const { return u.cwiseMax(lo_).cwiseMin(hi_); }

  // Minimized objective in u-space.
  double value(const Eigen::VectorXd& u) const {
    const double v = p_.objective(theta(u));
    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    return -v / p_.scale;
  }

  // Returns (u-gradient of value, theta-gradient of objective).
  std::pair<Eigen::VectorXd, std::vector<double>> gradient(const Eigen::VectorXd& u) const {
    const Theta t = theta(u);
    auto gt = p_.gradient(t);
    Eigen::VectorXd gu(idx(k_));
    for (std::size_t i = 0; i < k_; ++i)
      gu[idx(i)] = -gt[i] * dtheta_du(p_.coords[i], t[i]) / p_.scale;
    return {gu, std::move(gt)};
  }

  bool at_lo(const Eigen::VectorXd& u, std::size_t i) const {
    return u[idx(i)] <= lo_[idx(i)] + 1e-12 * (1.0 + std::abs(lo_[idx(i)]));
  }
  bool at_hi(const Eigen::VectorXd& u, std::size_t i) const {
    return u[idx(i)] >= hi_[idx(i)] - 1e-12 * (1.0 + std::abs(hi_[idx(i)]));
  }

  std::vector<bool> free_mask(const Eigen::VectorXd& u, const Eigen::VectorXd& gu) const {
    std::vector<bool> free(k_, true);
    for (std::size_t i = 0; i < k_; ++i) {
      if ((at_lo(u, i) && gu[idx(i)] > 0.0) || (at_hi(u, i) && gu[idx(i)] < 0.0))
        free[i] = false;
    }
    return free;
  }

  double residual(const std::vector<double>& gt, const std::vector<bool>& free) const {
    double r = 0.0;
    for (std::size_t i = 0; i < k_; ++i)
      if (free[i]) r = std::max(r, std::abs(gt[i]) / p_.scale);
    return r;
  }

  // Central-difference Hessian of the u-space value on the free block.
  std::optional<Eigen::MatrixXd> hessian(const Eigen::VectorXd& u) const {
    Eigen::MatrixXd h(idx(k_), idx(k_));
    for (std::size_t i = 0; i < k_; ++i) {
      const double step = 1e-5 * std::max(1.0, std::abs(u[idx(i)]));
      Eigen::VectorXd up = u, dn = u;
      up[idx(i)] += step;
      dn[idx(i)] -= step;
      const auto gp = gradient(up).first;
      const auto gm = gradient(dn).first;
      if (!gp.allFinite() || !gm.allFinite()) return std::nullopt;
      h.col(idx(i)) = (gp - gm) / (2.0 * step);
    }
    return Eigen::MatrixXd((h + h.transpose()) / 2.0);
  }

  std::size_t dim() const { return k_; }

 private:
  const BoxProblem& p_;
  std::size_t k_;
  Eigen::VectorXd lo_, hi_;
};

}  // namespace

BoxResult maximize_box(const BoxProblem& problem, const Theta& start, double tol,
                       int max_iter) {
  const Search s(problem);
  const auto k = static_cast<Eigen::Index>(s.dim());
  Eigen::VectorXd u = s.u_of(start);
  double f = s.value(u);
  if (!std::isfinite(f)) throw NumericalError("starting point outside the domain");
  auto [g, gt] = s.gradient(u);

  Eigen::MatrixXd inv_h = Eigen::MatrixXd::Identity(k, k);
  bool newton = false;
  BoxResult out;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    const auto free = s.free_mask(u, g);
    const double res = s.residual(gt, free);
    if (res <= tol) {
      out.converged = true;
      break;
    }
    if (res < 1e-4) newton = true;

    Eigen::VectorXd mask = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < k; ++i) mask[i] = free[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    const Eigen::VectorXd gf = g.cwiseProduct(mask);

    Eigen::VectorXd d;
    if (newton) {
      if (auto h = s.hessian(u)) {
        Eigen::MatrixXd hf = *h;
        for (Eigen::Index i = 0; i < k; ++i) {
          if (mask[i] == 0.0) {
            hf.row(i).setZero();
            hf.col(i).setZero();
            hf(i, i) = 1.0;
          }
        }
        Eigen::LLT<Eigen::MatrixXd> llt(hf);
        if (llt.info() == Eigen::Success) d = -llt.solve(gf);
      }
    }
    if (d.size() == 0) d = -(inv_h * gf).cwiseProduct(mask);
    if (!(gf.dot(d) < 0.0)) {
      inv_h.setIdentity();
      d = -gf;
    }
    const double span = d.cwiseAbs().maxCoeff();
    if (span > 10.0) d *= 10.0 / span;

    // Armijo backtracking with slack for round-off near the optimum.
    double alpha = 1.0;
    Eigen::VectorXd u_new;
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      u_new = s.clamp(u + alpha * d);
      f_new = s.value(u_new);
      const double slack = 1e-14 * (1.0 + std::abs(f));
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * g.dot(u_new - u) + slack) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted || (u_new - u).cwiseAbs().maxCoeff() == 0.0) {
      if (!newton) {
        newton = true;
        inv_h.setIdentity();
        continue;
      }
      break;
    }

    auto [g_new, gt_new] = s.gradient(u_new);
    const Eigen::VectorXd step = u_new - u;
    const Eigen::VectorXd y = g_new - g;
    const double sy = step.dot(y);
    if (sy > 1e-16 * step.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(k, k);
      inv_h = (I - rho * step * y.transpose()) * inv_h * (I - rho * y * step.transpose()) +
              rho * step * step.transpose();
    }
    u = u_new;
    f = f_new;
    g = g_new;
    gt = std::move(gt_new);
  }

  const auto free = s.free_mask(u, g);
  out.theta = s.theta(u);
  out.value = -f * problem.scale;
  out.residual = s.residual(gt, free);
  if (!out.converged) out.converged = out.residual <= tol;
  out.iterations = iter;
  for (std::size_t i = 0; i < s.dim(); ++i)
    if (s.at_lo(u, i) || s.at_hi(u, i)) out.on_boundary = true;
  return out;
}

}  // namespace richness::detail
