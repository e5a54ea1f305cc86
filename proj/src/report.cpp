#include "report.hpp"

namespace richness::report {

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json estimate_json(const ReplicateEstimate& e) {
  Json j;
  j["n_hat"] = optional_number(e.n_hat);
  if (e.ci_lo) j["ci"] = {*e.ci_lo, *e.ci_hi};
  if (!e.error.empty()) j["error"] = e.error;
  return j;
}

}  // namespace

Json theta_json(const Theta& theta) {
  Json j = Json::array();
  for (const double v : theta) j.push_back(v);
  return j;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json fit_json(const FitResult& fit) {
  Json j;
  j["family"] = fit.family.name();
  j["tau"] = fit.tau;
  j["D"] = fit.d;
  j["D_tau"] = fit.d_tau;
  j["theta_hat"] = theta_json(fit.theta_hat);
  j["theta_on_boundary"] = fit.theta_on_boundary;
  j["q_hat"] = fit.q_hat;
  j["q_clamped"] = fit.q_clamped;
  j["q_raw"] = fit.q_raw;
  j["p0_hat"] = fit.p0_hat;
  j["n_hat"] = fit.n_hat;
  j["n_classical"] = fit.n_classical;
  j["iterations"] = fit.iterations;
  j["gradient_residual"] = fit.gradient_residual;
  j["score_residual"] = optional_number(fit.score_residual);
  j["se_n"] = optional_number(fit.se_n);
  j["asym_cov"] = fit.asym_cov ? matrix_json(*fit.asym_cov) : Json(nullptr);
  j["notes"] = fit.notes;
  return j;
}

Json trace_json(const SelectionTrace& trace) {
  Json j;
  j["target"] = to_string(trace.target);
  j["selected_tau"] = trace.selected_tau;
  Json records = Json::array();
  for (const auto& r : trace.records) {
    Json rec;
    rec["tau"] = r.tau;
    rec["p0_hat"] = r.p0_hat;
    rec["n_hat"] = r.n_hat;
    rec["var_proxy"] = r.var_proxy;
    rec["bias_proxy"] = r.bias_proxy;
    rec["criterion"] = r.criterion;
    rec["redraws"] = r.boot.redraws;
    records.push_back(std::move(rec));
  }
  j["records"] = std::move(records);
  j["warnings"] = trace.warnings;
  return j;
}

Json metrics_json(const EstimatorMetrics& m) {
  Json j;
  j["estimator"] = m.name;
  j["evaluated"] = m.evaluated;
  j["failures"] = m.failures;
  j["mean"] = m.mean;
  j["se_over_n"] = m.se_over_n;
  j["rmae"] = m.rmae;
  j["rmse_rel"] = m.rmse_rel;
  j["rmse_table"] = m.rmse_table;
  j["inf"] = optional_number(m.inf_rate);
  j["sup"] = optional_number(m.sup_rate);
  return j;
}

Json sim_json(const SimReport& report, bool per_replicate) {
  const SimDesign& d = report.design;
  Json j;
  Json design;
  design["n_true"] = d.n_true;
  design["q_true"] = d.q_true;
  design["family"] = d.family.name();
  design["theta"] = theta_json(d.theta);
  design["nuisance"] = d.nuisance.describe();
  design["reps"] = d.reps;
  design["m_boot"] = d.m_boot;
  design["ci_level"] = d.ci_level;
  design["seed"] = d.seed;
  j["design"] = std::move(design);
  j["fitted_family"] = report.fitted_family.name();
  j["failures"] = report.failures;
  Json est = Json::array();
  for (const auto& m : report.estimators) est.push_back(metrics_json(m));
  j["estimators"] = std::move(est);
  if (per_replicate) {
    Json reps = Json::array();
    for (const auto& o : report.replicates) {
      Json r;
      r["index"] = o.index;
      r["D"] = o.d;
      r["tau_used"] = o.tau_used;
      r["n_hat"] = estimate_json(o.n_hat);
      r["chao"] = estimate_json(o.chao);
      r["n_classical"] = estimate_json(o.n_classical);
      reps.push_back(std::move(r));
    }
    j["replicates"] = std::move(reps);
  }
  return j;
}

Json growth_json(const std::vector<GrowthRow>& rows) {
  Json arr = Json::array();
  for (const auto& r : rows) {
    Json j;
    j["fraction"] = r.fraction;
    j["gamma"] = r.gamma;
    j["prefix_tokens"] = r.prefix_tokens;
    j["prefix_D"] = r.prefix_d;
    j["predicted"] = r.predicted;
    j["true"] = r.true_total;
    j["tau_used"] = r.tau_used;
    arr.push_back(std::move(j));
  }
  return arr;
}

Json curve_json(const GrowthCurve& curve) {
  Json j;
  j["base_D"] = curve.base_d;
  Json pts = Json::array();
  for (const auto& p : curve.points) pts.push_back({{"gamma", p.gamma}, {"e_gamma_d", p.e_gamma_d}});
  j["points"] = std::move(pts);
  return j;
}

}  // namespace richness::report
