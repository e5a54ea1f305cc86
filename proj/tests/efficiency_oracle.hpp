#pragma once

// Efficient score and information computed from first principles: the
// ordinary score of log f+ on x <= tau by finite differences, and on x > tau
// its projection, the gradient of log P+(X > tau).

#include <Eigen/Dense>
#include <functional>
#include <map>

#include "oracles.hpp"

namespace oracle {

struct Model {
  // pmf(params, x) of the rare component, params = theta.
  Pmf pmf;
  std::vector<double> theta;
  double q;
  int tau;
};

inline double head_mass(const Model& m, const std::vector<double>& theta) {
  double s = 0.0;
  for (int x = 0; x <= m.tau; ++x) s += m.pmf(theta, x);
  return s;
}

// Stacked (q, theta) vector for finite differences.
inline std::vector<double> stacked(const Model& m) {
  std::vector<double> v{m.q};
  v.insert(v.end(), m.theta.begin(), m.theta.end());
  return v;
}

inline Eigen::VectorXd efficient_score(const Model& m, int x) {
  const auto v0 = stacked(m);
  std::function<double(const std::vector<double>&)> f;
  if (x <= m.tau) {
    f = [&](const std::vector<double>& v) {
      const std::vector<double> th(v.begin() + 1, v.end());
      return std::log(v[0] * m.pmf(th, x) / (1.0 - v[0] * m.pmf(th, 0)));
    };
  } else {
    f = [&](const std::vector<double>& v) {
      const std::vector<double> th(v.begin() + 1, v.end());
      return std::log((1.0 - v[0] * head_mass(m, th)) / (1.0 - v[0] * m.pmf(th, 0)));
    };
  }
  Eigen::VectorXd s(static_cast<Eigen::Index>(v0.size()));
  for (std::size_t j = 0; j < v0.size(); ++j)
    s(static_cast<Eigen::Index>(j)) = richardson_diff(f, v0, j);
  return s;
}

// f+(x) for x >= 1 under q R + (1 - q) F, F a mass map on x > tau.
inline std::map<int, double> observed_law(const Model& m, const std::map<int, double>& F,
                                          int cutoff) {
  std::map<int, double> out;
  const double z = 1.0 - m.q * m.pmf(m.theta, 0);
  for (int x = 1; x <= cutoff; ++x) {
    const auto it = F.find(x);
    const double fx = it == F.end() ? 0.0 : it->second;
    out[x] = (m.q * m.pmf(m.theta, x) + (1.0 - m.q) * fx) / z;
  }
  return out;
}

}  // namespace oracle
