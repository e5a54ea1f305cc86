#include "richness/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "report.hpp"
#include "richness/efficiency.hpp"
#include "richness/errors.hpp"
#include "richness/fit.hpp"
#include "richness/growth.hpp"
#include "richness/selection.hpp"
#include "richness/simulate.hpp"
#include "text_format.hpp"

namespace richness {

namespace {

using report::Json;

struct InputArgs {
  std::string path;
  std::string format = "pairs";
  std::string kind = "counts";
};

struct OutputArgs {
  std::string path;
  std::string format = "json";
};

struct CommonArgs {
  InputArgs input;
  OutputArgs output;
  std::string family = "poisson";
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

void add_input(CLI::App* cmd, InputArgs& in) {
  cmd->add_option("-i,--input", in.path, "Input file ('-' for standard input)")->required();
  cmd->add_option("--format", in.format, "Counts format: pairs | raw")->capture_default_str();
  cmd->add_option("--input-kind", in.kind, "counts | text")->capture_default_str();
}

void add_output(CLI::App* cmd, OutputArgs& out) {
  cmd->add_option("-o,--output", out.path, "Output file (default: standard output)");
  cmd->add_option("--output-format", out.format, "json | csv")->capture_default_str();
}

std::string read_all(const std::string& path) {
  std::ostringstream buf;
  if (path == "-") {
    buf << std::cin.rdbuf();
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    buf << in.rdbuf();
  }
  return buf.str();
}

CountData read_data(const InputArgs& in) {
  if (in.kind == "text") return tokenize(read_all(in.path));
  if (in.kind != "counts") throw InputError("--input-kind must be counts or text");
  std::istringstream stream(read_all(in.path));
  return load_counts(stream, parse_count_format(in.format), in.path);
}

void check_output_format(const OutputArgs& out) {
  if (out.format != "json" && out.format != "csv")
    throw InputError("--output-format must be json or csv");
}

void emit(const OutputArgs& args, std::ostream& out, const std::string& content) {
  if (args.path.empty()) {
    out << content;
    return;
  }
  std::ofstream file(args.path, std::ios::binary);
  if (!file) throw InputError("cannot write " + args.path);
  file << content;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::uint64_t require_seed(const CommonArgs& c, const std::string& why) {
  if (!c.seed) throw InputError("--seed is required for " + why);
  return *c.seed;
}

std::optional<int> parse_tau(const std::string& text, bool allow_auto) {
  if (text == "auto") {
    if (!allow_auto) throw InputError("tau 'auto' is not accepted by this command");
    return std::nullopt;
  }
  std::size_t used = 0;
  int tau = 0;
  try {
    tau = std::stoi(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) throw InputError("invalid tau '" + text + "'");
  return tau;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw InputError("invalid " + what + " '" + text + "'");
    out.push_back(v);
  }
  if (out.empty()) throw InputError("empty " + what);
  return out;
}

Nuisance parse_nuisance(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (kind == "uniform") {
    const auto sep = rest.find(':');
    if (sep == std::string::npos) throw InputError("nuisance uniform:LO:HI expected");
    const auto lo = parse_list(rest.substr(0, sep), "nuisance bound");
    const auto hi = parse_list(rest.substr(sep + 1), "nuisance bound");
    return Nuisance::uniform(static_cast<Abundance>(lo[0]), static_cast<Abundance>(hi[0]));
  }
  if (kind == "custom") {
    std::map<Abundance, double> mass;
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw InputError("nuisance custom:X=W,... expected");
      const auto x = parse_list(item.substr(0, eq), "nuisance point");
      const auto w = parse_list(item.substr(eq + 1), "nuisance mass");
      mass[static_cast<Abundance>(x[0])] += w[0];
    }
    return Nuisance::custom(std::move(mass));
  }
  throw InputError("unknown nuisance '" + text + "' (uniform:LO:HI or custom:X=W,...)");
}

Json header(const std::string& command, const CommonArgs& c, bool stochastic) {
  Json j;
  j["schema_version"] = report::kSchemaVersion;
  j["command"] = command;
  if (stochastic && c.seed) j["seed"] = *c.seed;
  return j;
}

struct SelectionArgs {
  int tau_min = 0;
  int tau_max = 0;
  int m_boot = 100;
  std::string target = "p0";
};

void add_selection(CLI::App* cmd, SelectionArgs& s) {
  cmd->add_option("--tau-min", s.tau_min, "Smallest tau searched (default: family minimum)");
  cmd->add_option("--tau-max", s.tau_max,
                  "Largest tau searched (default: min(largest abundance, 40))");
  cmd->add_option("--boot", s.m_boot, "Bootstrap replicates")->capture_default_str();
  cmd->add_option("--target", s.target, "Selection target: p0 | n")->capture_default_str();
}

SelectionOptions selection_options(const SelectionArgs& s, const CommonArgs& c,
                                   const std::string& why) {
  SelectionOptions o;
  o.tau_min = s.tau_min;
  o.tau_max = s.tau_max;
  o.m_boot = s.m_boot;
  o.seed = require_seed(c, why);
  o.target = parse_selection_target(s.target);
  o.threads = c.threads;
  return o;
}

Json chao_field(const CountData& data, Json& parent) {
  try {
    return chao(data);
  } catch (const NumericalError& e) {
    parent["chao_note"] = e.what();
    return nullptr;
  }
}

// Fitted result at a fixed tau or at the selected one; the trace is returned
// when tau was selected.
FitResult fit_with_policy(const CountData& data, const Family& family,
                          const std::optional<int>& tau, const SelectionArgs& sel,
                          const CommonArgs& c, bool diagnostics,
                          std::optional<SelectionTrace>& trace) {
  FitOptions fo;
  if (tau) {
    fo.tau = *tau;
  } else {
    trace = select_tau(data, family, selection_options(sel, c, "tau auto"));
    fo.tau = trace->selected_tau;
  }
  return fit_full(data, family, fo, diagnostics);
}

int cmd_estimate(const CommonArgs& c, const std::string& tau_text, const SelectionArgs& sel,
                 std::ostream& out) {
  check_output_format(c.output);
  const Family family = parse_family(c.family);
  const auto tau = parse_tau(tau_text, true);
  const CountData data = read_data(c.input);
  std::optional<SelectionTrace> trace;
  const FitResult fit = fit_with_policy(data, family, tau, sel, c, true, trace);

  Json j = header("estimate", c, !tau.has_value());
  j["family"] = family.name();
  j["D"] = fit.d;
  j["D_tau"] = fit.d_tau;
  j["tau"] = fit.tau;
  j["theta_hat"] = report::theta_json(fit.theta_hat);
  j["q_hat"] = fit.q_hat;
  j["q_clamped"] = fit.q_clamped;
  j["n_hat"] = fit.n_hat;
  j["n_classical"] = fit.n_classical;
  j["chao"] = chao_field(data, j);
  j["se_n"] = fit.se_n ? Json(*fit.se_n) : Json(nullptr);
  j["score_residual"] = fit.score_residual ? Json(*fit.score_residual) : Json(nullptr);
  j["notes"] = fit.notes;
  if (trace) {
    j["selected_tau"] = trace->selected_tau;
    j["selection"] = report::trace_json(*trace);
  }
  if (c.output.format == "csv") {
    using detail::format_double;
    std::ostringstream csv;
    csv << "D,D_tau,tau,q_hat,n_hat,n_classical,chao,se_n\n"
        << fit.d << ',' << fit.d_tau << ',' << fit.tau << ',' << format_double(fit.q_hat) << ','
        << format_double(fit.n_hat) << ',' << format_double(fit.n_classical) << ','
        << (j["chao"].is_null() ? "" : format_double(j["chao"].get<double>())) << ','
        << (fit.se_n ? format_double(*fit.se_n) : "") << '\n';
    emit(c.output, out, csv.str());
  } else {
    emit(c.output, out, dump(j));
  }
  return 0;
}

int cmd_select(const CommonArgs& c, const SelectionArgs& sel, std::ostream& out) {
  check_output_format(c.output);
  const Family family = parse_family(c.family);
  const CountData data = read_data(c.input);
  const SelectionTrace trace =
      select_tau(data, family, selection_options(sel, c, "select-tau"));
  if (c.output.format == "csv") {
    emit(c.output, out, trace_csv(trace));
    return 0;
  }
  Json j = header("select-tau", c, true);
  j["family"] = family.name();
  j["D"] = data.distinct();
  j["m_boot"] = sel.m_boot;
  j["selected_tau"] = trace.selected_tau;
  j["selected_fit"] = report::fit_json(trace.selected().fit);
  j["trace"] = report::trace_json(trace);
  emit(c.output, out, dump(j));
  return 0;
}

struct SimArgs {
  std::uint64_t n_true = 1000;
  double q = 0.4;
  std::string theta = "1";
  std::string nuisance = "uniform:10:40";
  int reps = 1000;
  double ci = 0.95;
  std::string tau = "auto";
  std::string fit_family;
  bool per_replicate = false;
  bool no_ci = false;
};

int cmd_simulate(const CommonArgs& c, const SimArgs& s, const SelectionArgs& sel,
                 std::ostream& out) {
  check_output_format(c.output);
  SimDesign d;
  d.n_true = s.n_true;
  d.q_true = s.q;
  d.family = parse_family(c.family);
  d.theta = Theta(parse_list(s.theta, "theta"));
  d.nuisance = parse_nuisance(s.nuisance);
  d.reps = s.reps;
  d.m_boot = sel.m_boot;
  d.ci_level = s.ci;
  d.seed = require_seed(c, "simulate");
  const Family fitted = s.fit_family.empty() ? d.family : parse_family(s.fit_family);

  MonteCarloOptions o;
  const auto tau = parse_tau(s.tau, true);
  if (tau) {
    o.policy = TauPolicy::fixed_at(*tau);
  } else {
    o.policy = TauPolicy::gl(parse_selection_target(sel.target));
    o.policy.tau_min = sel.tau_min;
    o.policy.tau_max = sel.tau_max;
  }
  o.confidence_intervals = !s.no_ci;
  o.threads = c.threads;
  const SimReport rep = run_monte_carlo(d, fitted, o);
  if (c.output.format == "csv") {
    emit(c.output, out, report_csv(rep));
    return 0;
  }
  Json j = header("simulate", c, true);
  j["tau_policy"] = tau ? Json(*tau) : Json("auto");
  j.update(report::sim_json(rep, s.per_replicate));
  emit(c.output, out, dump(j));
  return 0;
}

int cmd_compare(const CommonArgs& c, const std::string& tau_text, const SelectionArgs& sel,
                std::ostream& out) {
  check_output_format(c.output);
  const Family family = parse_family(c.family);
  const auto tau = tau_text.empty() ? std::optional<int>(family.tau_min())
                                    : parse_tau(tau_text, true);
  const CountData data = read_data(c.input);
  std::optional<SelectionTrace> trace;
  const FitResult fit = fit_with_policy(data, family, tau, sel, c, false, trace);

  Json j = header("compare", c, !tau.has_value());
  j["family"] = family.name();
  j["D"] = data.distinct();
  j["tau"] = fit.tau;
  if (trace) j["selected_tau"] = trace->selected_tau;
  Json est = Json::array();
  auto add = [&](const std::string& name, Json value, const std::string& note) {
    Json e;
    e["estimator"] = name;
    e["value"] = std::move(value);
    if (!note.empty()) e["note"] = note;
    est.push_back(std::move(e));
  };
  add("n_hat", fit.n_hat, "");
  add("n_classical", fit.n_classical, "");
  try {
    add("chao", chao(data), "");
  } catch (const NumericalError& e) {
    add("chao", nullptr, e.what());
  }
  try {
    const double z = zelterman_theta(data);
    add("zelterman", static_cast<double>(data.distinct()) / (1.0 - std::exp(-z)), "");
  } catch (const NumericalError& e) {
    add("zelterman", nullptr, e.what());
  }
  j["estimators"] = est;
  if (c.output.format == "csv") {
    std::ostringstream csv;
    csv << "estimator,value,note\n";
    for (const auto& e : est)
      csv << e["estimator"].get<std::string>() << ','
          << (e["value"].is_null() ? "" : detail::format_double(e["value"].get<double>())) << ','
          << (e.contains("note") ? e["note"].get<std::string>() : "") << '\n';
    emit(c.output, out, csv.str());
  } else {
    emit(c.output, out, dump(j));
  }
  return 0;
}

int cmd_extrapolate(const CommonArgs& c, const std::string& tau_text, const SelectionArgs& sel,
                    const std::string& gammas_text, const std::string& fractions_text,
                    std::ostream& out) {
  check_output_format(c.output);
  const Family family = parse_family(c.family);
  const auto tau = parse_tau(tau_text, true);

  if (!fractions_text.empty()) {
    if (c.input.kind != "text") throw InputError("--fractions needs --input-kind text");
    const auto fractions = parse_list(fractions_text, "fractions");
    GrowthOptions o;
    if (tau) {
      o.policy = TauPolicy::fixed_at(*tau);
    } else {
      o.policy = TauPolicy::gl(parse_selection_target(sel.target));
      o.policy.tau_min = sel.tau_min;
      o.policy.tau_max = sel.tau_max;
      o.seed = require_seed(c, "tau auto");
    }
    o.m_boot = sel.m_boot;
    o.threads = c.threads;
    const auto rows = growth_experiment(read_all(c.input.path), family, fractions, o);
    if (c.output.format == "csv") {
      emit(c.output, out, growth_csv(rows));
      return 0;
    }
    Json j = header("extrapolate", c, !tau.has_value());
    j["family"] = family.name();
    j["experiment"] = report::growth_json(rows);
    emit(c.output, out, dump(j));
    return 0;
  }

  const CountData data = read_data(c.input);
  std::optional<SelectionTrace> trace;
  const FitResult fit = fit_with_policy(data, family, tau, sel, c, false, trace);
  const GrowthCurve curve = growth_curve(fit, parse_list(gammas_text, "gamma list"));
  if (c.output.format == "csv") {
    std::ostringstream csv;
    csv << "gamma,e_gamma_d\n";
    for (const auto& p : curve.points)
      csv << detail::format_double(p.gamma) << ',' << detail::format_double(p.e_gamma_d) << '\n';
    emit(c.output, out, csv.str());
    return 0;
  }
  Json j = header("extrapolate", c, !tau.has_value());
  j["family"] = family.name();
  j["tau"] = fit.tau;
  j["n_hat"] = fit.n_hat;
  j["curve"] = report::curve_json(curve);
  emit(c.output, out, dump(j));
  return 0;
}

int cmd_diagnose(const CommonArgs& c, const std::string& tau_text, const std::string& theta_text,
                 std::optional<double> q_given, std::ostream& out) {
  check_output_format(c.output);
  if (c.output.format == "csv") throw InputError("diagnose supports JSON output only");
  const Family family = parse_family(c.family);
  const int tau = *parse_tau(tau_text, false);
  const CountData data = read_data(c.input);
  FitOptions fo;
  fo.tau = tau;
  Theta theta;
  double q = 0.0;
  Json j = header("diagnose", c, false);
  if (theta_text.empty()) {
    const FitResult fit = fit_full(data, family, fo, false);
    theta = fit.theta_hat;
    q = q_given ? *q_given : fit.q_hat;
    j["evaluated_at"] = q_given ? "fitted theta, given q" : "fitted";
  } else {
    theta = Theta(parse_list(theta_text, "theta"));
    validate_tau(family, tau);
    check_domain(family, theta);
    q = q_given ? *q_given : q_hat(data, family, theta, tau).value;
    j["evaluated_at"] = q_given ? "given" : "given theta, fitted q";
  }
  j["family"] = family.name();
  j["tau"] = tau;
  j["D"] = data.distinct();
  j["theta"] = report::theta_json(theta);
  j["q"] = q;
  j["score_residual"] = score_residual(data, family, theta, q, tau);
  const Eigen::MatrixXd info = fisher_information(family, theta, q, tau);
  j["fisher_information"] = report::matrix_json(info);
  Json scores = Json::array();
  for (int x = 1; x <= tau + 1; ++x) {
    const Eigen::VectorXd s = efficient_score(family, theta, q, tau, static_cast<Abundance>(x));
    Json row;
    row["x"] = x <= tau ? Json(x) : Json("tail");
    row["score"] = Json(std::vector<double>(s.data(), s.data() + s.size()));
    scores.push_back(std::move(row));
  }
  j["efficient_scores"] = std::move(scores);
  try {
    const auto cov = asymptotic_covariance(family, theta, q, tau, data.distinct());
    j["asym_cov"] = report::matrix_json(cov.covariance);
    j["se_n"] = cov.se_n;
    j["condition_number"] = cov.condition;
  } catch (const NumericalError& e) {
    j["asym_cov"] = nullptr;
    j["se_n"] = nullptr;
    j["covariance_note"] = e.what();
  }
  emit(c.output, out, dump(j));
  return 0;
}

void write_error(std::ostream& err, const std::string& kind, const std::string& message) {
  Json j;
  j["error"] = {{"kind", kind}, {"message", message}};
  err << j.dump() << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Species richness estimation from zero-truncated abundance counts"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "richness 1.0");

  CommonArgs common;
  SelectionArgs sel;
  std::string tau_text;
  auto add_common = [&](CLI::App* cmd, bool with_seed) {
    add_input(cmd, common.input);
    add_output(cmd, common.output);
    cmd->add_option("-f,--family", common.family,
                    "poisson | negbin | poisson-mixture:J | truncated-poisson-support:T")
        ->capture_default_str();
    cmd->add_option("--threads", common.threads, "Worker threads (default: RICHNESS_THREADS)");
    if (with_seed) cmd->add_option("--seed", common.seed, "Random seed");
  };

  auto* estimate = app.add_subcommand("estimate", "Estimate N at a fixed or selected tau");
  add_common(estimate, true);
  estimate->add_option("-t,--tau", tau_text, "Truncation level or 'auto'")->required();
  add_selection(estimate, sel);

  auto* select = app.add_subcommand("select-tau", "Data-driven choice of tau with its trace");
  add_common(select, true);
  add_selection(select, sel);

  SimArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo evaluation on a synthetic design");
  add_output(simulate, common.output);
  simulate->add_option("-f,--family", common.family, "Family generating rare abundances")
      ->capture_default_str();
  simulate->add_option("--threads", common.threads, "Worker threads");
  simulate->add_option("--seed", common.seed, "Random seed");
  simulate->add_option("-N,--n", sim.n_true, "True number of species")->capture_default_str();
  simulate->add_option("-q,--q", sim.q, "Rare-species proportion")->capture_default_str();
  simulate->add_option("--theta", sim.theta, "Comma-separated parameters")->capture_default_str();
  simulate->add_option("--nuisance", sim.nuisance, "uniform:LO:HI | custom:X=W,...")
      ->capture_default_str();
  simulate->add_option("--reps", sim.reps, "Monte Carlo replicates")->capture_default_str();
  simulate->add_option("--ci", sim.ci, "Confidence level")->capture_default_str();
  simulate->add_option("-t,--tau", sim.tau, "Truncation level or 'auto'")->capture_default_str();
  simulate->add_option("--fit-family", sim.fit_family, "Family fitted (default: --family)");
  simulate->add_flag("--per-replicate", sim.per_replicate, "Include per-replicate results");
  simulate->add_flag("--no-ci", sim.no_ci, "Skip bootstrap intervals for fixed tau");
  add_selection(simulate, sel);

  auto* compare = app.add_subcommand("compare", "All estimators side by side");
  add_common(compare, true);
  compare->add_option("-t,--tau", tau_text, "Truncation level or 'auto' (default: family minimum)");
  add_selection(compare, sel);

  std::string gammas = "1,2,4,8";
  std::string fractions;
  auto* extrap = app.add_subcommand("extrapolate", "Distinct counts in an enlarged sample");
  add_common(extrap, true);
  extrap->add_option("-t,--tau", tau_text, "Truncation level or 'auto'")->required();
  extrap->add_option("--gamma", gammas, "Comma-separated enlargement factors")
      ->capture_default_str();
  extrap->add_option("--fractions", fractions,
                     "Text prefix fractions in (0,1] for the held-out experiment");
  add_selection(extrap, sel);

  std::string theta_text;
  std::optional<double> q_given;
  auto* diagnose = app.add_subcommand("diagnose", "Efficient scores and information");
  add_common(diagnose, false);
  diagnose->add_option("-t,--tau", tau_text, "Truncation level")->required();
  diagnose->add_option("--theta", theta_text, "Evaluate at these parameters instead of the fit");
  diagnose->add_option("--q", q_given, "Evaluate at this q instead of q_hat");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    write_error(err, "usage", e.what());
    return 2;
  }

  try {
    if (estimate->parsed()) return cmd_estimate(common, tau_text, sel, out);
    if (select->parsed()) return cmd_select(common, sel, out);
    if (simulate->parsed()) return cmd_simulate(common, sim, sel, out);
    if (compare->parsed()) return cmd_compare(common, tau_text, sel, out);
    if (extrap->parsed()) return cmd_extrapolate(common, tau_text, sel, gammas, fractions, out);
    if (diagnose->parsed()) return cmd_diagnose(common, tau_text, theta_text, q_given, out);
  } catch (const InputError& e) {
    write_error(err, "input", e.what());
    return 2;
  } catch (const NumericalError& e) {
    write_error(err, "numerical", e.what());
    return 3;
  } catch (const std::exception& e) {
    write_error(err, "numerical", e.what());
    return 3;
  }
  return 2;
}

}  // namespace richness
