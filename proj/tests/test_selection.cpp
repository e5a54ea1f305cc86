#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "richness/errors.hpp"
#include "richness/selection.hpp"
#include "synthetic.hpp"

using namespace richness;
using Hist = std::map<Abundance, Frequency>;

namespace {

SelectionOptions quick(std::uint64_t seed, int m_boot = 30) {
  SelectionOptions o;
  o.m_boot = m_boot;
  o.seed = seed;
  o.tau_max = 15;
  return o;
}

}  // namespace

TEST(BiasProxy, WorkedExample) {
  const std::vector<double> p{0.30, 0.30, 0.45};
  const std::vector<double> v{0.001, 0.001, 0.002};
  EXPECT_NEAR(bias_proxy(p, v, 2), 0.0215, 1e-15);
}

TEST(BiasProxy, VanishesAtFirstIndexAndOnFlatCurves) {
  const std::vector<double> p{0.2, 0.5, 0.9};
  const std::vector<double> v{0.0, 0.0, 0.0};
  EXPECT_EQ(bias_proxy(p, v, 0), 0.0);
  const std::vector<double> flat(5, 0.4);
  const std::vector<double> fv(5, 0.01);
  for (std::size_t i = 0; i < flat.size(); ++i) EXPECT_EQ(bias_proxy(flat, fv, i), 0.0);
}

TEST(BiasProxy, NonnegativeAndPositivePartOfLargestGap) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(8), v(8);
    for (auto& x : p) x = u(rng);
    for (auto& x : v) x = 0.05 * u(rng);
    for (std::size_t i = 0; i < p.size(); ++i) {
      double want = 0.0;
      for (std::size_t j = 0; j <= i; ++j)
        want = std::max(want, (p[j] - p[i]) * (p[j] - p[i]) - v[j]);
      EXPECT_DOUBLE_EQ(bias_proxy(p, v, i), want);
    }
  }
}

TEST(BiasProxy, RejectsBadIndex) {
  EXPECT_THROW(bias_proxy({0.1}, {0.0}, 1), InputError);
}

TEST(SelectionTarget, ParsesAndPrints) {
  EXPECT_EQ(parse_selection_target("p0"), SelectionTarget::p0);
  EXPECT_EQ(parse_selection_target("n"), SelectionTarget::n);
  EXPECT_EQ(to_string(SelectionTarget::n), "n");
  EXPECT_THROW(parse_selection_target("mse"), InputError);
}

TEST(Selection, RejectsBadOptions) {
  const auto d = synthetic::dataset(Family::poisson(), {1.0}, 0.6, 1000, 1);
  auto o = quick(1);
  o.m_boot = 1;
  EXPECT_THROW(select_tau(d, Family::poisson(), o), InputError);
  o = quick(1);
  o.tau_max = static_cast<int>(d.max_abundance()) + 1;
  EXPECT_THROW(select_tau(d, Family::poisson(), o), InputError);
  o = quick(1);
  o.tau_min = 1;
  EXPECT_THROW(select_tau(d, Family::poisson(), o), InputError);
  o = quick(1);
  o.tau_min = 8;
  o.tau_max = 6;
  EXPECT_THROW(select_tau(d, Family::poisson(), o), InputError);
}

TEST(Selection, TraceInvariants) {
  const auto d = synthetic::dataset(Family::poisson(), {1.0}, 0.6, 1000, 2);
  for (auto target : {SelectionTarget::p0, SelectionTarget::n}) {
    auto o = quick(2);
    o.target = target;
    const auto t = select_tau(d, Family::poisson(), o);
    ASSERT_FALSE(t.records.empty());
    EXPECT_EQ(t.target, target);
    EXPECT_EQ(t.records.front().bias_proxy, 0.0);
    double best = t.records.front().criterion;
    for (std::size_t i = 0; i < t.records.size(); ++i) {
      const auto& r = t.records[i];
      if (i > 0) EXPECT_GT(r.tau, t.records[i - 1].tau);
      EXPECT_GE(r.var_proxy, 0.0);
      EXPECT_GE(r.bias_proxy, 0.0);
      EXPECT_DOUBLE_EQ(r.criterion, r.bias_proxy + r.var_proxy);
      EXPECT_EQ(r.fit.tau, r.tau);
      EXPECT_NEAR(r.p0_hat, r.fit.p0_hat, 0.0);
      best = std::min(best, r.criterion);
    }
    // Argmin with ties to the smallest tau.
    const auto first_min =
        std::find_if(t.records.begin(), t.records.end(),
                     [&](const TauRecord& r) { return r.criterion == best; });
    EXPECT_EQ(t.selected_tau, first_min->tau);
    EXPECT_EQ(t.selected().tau, t.selected_tau);
  }
}

TEST(Selection, BiasProxyMatchesTraceEstimates) {
  const auto d = synthetic::dataset(Family::poisson(), {1.0}, 0.4, 1000, 3);
  const auto t = select_tau(d, Family::poisson(), quick(3));
  std::vector<double> p, v;
  for (const auto& r : t.records) {
    p.push_back(r.p0_hat);
    v.push_back(r.var_proxy);
  }
  for (std::size_t i = 0; i < p.size(); ++i)
    EXPECT_DOUBLE_EQ(t.records[i].bias_proxy, bias_proxy(p, v, i));
}

TEST(Selection, CollapsedRangeSelectsItsOnlyTau) {
  const auto d = synthetic::dataset(Family::poisson(), {1.0}, 0.6, 1000, 4);
  auto o = quick(4);
  o.tau_min = o.tau_max = 6;
  const auto t = select_tau(d, Family::poisson(), o);
  ASSERT_EQ(t.records.size(), 1u);
  EXPECT_EQ(t.selected_tau, 6);
}

TEST(Selection, DeterministicAcrossThreadCounts) {
  const auto d = synthetic::dataset(Family::poisson(), {1.0}, 0.6, 1000, 5);
  auto o = quick(5);
  o.threads = 1;
  const auto a = select_tau(d, Family::poisson(), o);
  o.threads = 4;
  const auto b = select_tau(d, Family::poisson(), o);
  ASSERT_EQ(a.records.size(), b.records.size());
  EXPECT_EQ(a.selected_tau, b.selected_tau);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].var_proxy, b.records[i].var_proxy);
    EXPECT_EQ(a.records[i].criterion, b.records[i].criterion);
  }
  o.seed = 6;
  const auto c = select_tau(d, Family::poisson(), o);
  EXPECT_NE(a.records.back().var_proxy, c.records.back().var_proxy);
}

TEST(Selection, CsvHeaderAndRows) {
  const auto d = synthetic::dataset(Family::poisson(), {1.0}, 0.6, 1000, 7);
  auto o = quick(7);
  o.tau_max = 5;
  const auto t = select_tau(d, Family::poisson(), o);
  const auto csv = trace_csv(t);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "tau,p0_hat,n_hat,var_proxy,bias_proxy,criterion");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')),
            t.records.size() + 1);
}

TEST(Selection, DefaultTauMax) {
  EXPECT_EQ(default_tau_max(CountData(Hist{{1, 3}, {7, 1}})), 7);
  EXPECT_EQ(default_tau_max(CountData(Hist{{1, 3}, {700, 1}})), 40);
}

TEST(Bootstrap, SharedResamplesAcrossTau) {
  // Draw 0 of each replicate is the same resample at every tau, so the
  // replicate values at two taus are strongly correlated.
  const auto d = synthetic::dataset(Family::poisson(), {1.0}, 0.6, 1000, 8);
  BootstrapOptions o;
  o.m_boot = 60;
  o.seed = 8;
  FitOptions f;
  f.tau = 6;
  const auto fa = fit_full(d, Family::poisson(), f, false);
  f.tau = 7;
  const auto fb = fit_full(d, Family::poisson(), f, false);
  const auto a = bootstrap(d, Family::poisson(), 6, fa, o);
  const auto b = bootstrap(d, Family::poisson(), 7, fb, o);
  ASSERT_EQ(a.p0.size(), 60u);
  const auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  const double ma = mean(a.p0), mb = mean(b.p0);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t j = 0; j < 60; ++j) {
    sab += (a.p0[j] - ma) * (b.p0[j] - mb);
    saa += (a.p0[j] - ma) * (a.p0[j] - ma);
    sbb += (b.p0[j] - mb) * (b.p0[j] - mb);
  }
  EXPECT_GT(sab / std::sqrt(saa * sbb), 0.8);
  EXPECT_EQ(a.p0_hat, fa.p0_hat);
  EXPECT_EQ(a.n_hat, fa.n_hat);
}

TEST(Bootstrap, VarianceFormula) {
  const auto d = synthetic::dataset(Family::poisson(), {1.0}, 0.6, 1000, 9);
  BootstrapOptions o;
  o.m_boot = 40;
  o.seed = 9;
  FitOptions f;
  f.tau = 5;
  const auto full = fit_full(d, Family::poisson(), f, false);
  const auto s = bootstrap(d, Family::poisson(), 5, full, o);
  double want = 0.0;
  for (double v : s.p0) want += (v - full.p0_hat) * (v - full.p0_hat);
  EXPECT_DOUBLE_EQ(s.variance(SelectionTarget::p0), want / 40.0);
  double want_n = 0.0;
  for (double v : s.n) want_n += (v - full.n_hat) * (v - full.n_hat);
  EXPECT_DOUBLE_EQ(s.variance(SelectionTarget::n), want_n / 40.0);
  EXPECT_DOUBLE_EQ(bootstrap_variance(d, Family::poisson(), 5, o), want / 40.0);
}

TEST(Bootstrap, VarianceTracksMonteCarloVariance) {
  const Family fam = Family::poisson();
  FitOptions f;
  f.tau = 5;
  std::vector<double> p0;
  for (std::uint64_t r = 0; r < 200; ++r)
    p0.push_back(fit_full(synthetic::dataset(fam, {1.0}, 0.6, 1000, 1000 + r), fam, f, false).p0_hat);
  const double m = std::accumulate(p0.begin(), p0.end(), 0.0) / 200.0;
  double mc = 0.0;
  for (double v : p0) mc += (v - m) * (v - m);
  mc /= 199.0;

  double boot = 0.0;
  BootstrapOptions o;
  o.m_boot = 200;
  for (std::uint64_t k = 0; k < 5; ++k) {
    const auto d = synthetic::dataset(fam, {1.0}, 0.6, 1000, 5000 + k);
    o.seed = k;
    boot += bootstrap_variance(d, fam, 5, o) / 5.0;
  }
  EXPECT_GT(boot, mc / 2.0);
  EXPECT_LT(boot, mc * 2.0);
}
