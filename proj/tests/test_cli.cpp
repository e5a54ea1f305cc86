#include <gtest/gtest.h>

#include <cstdlib>
#include <cmath>
#include <filesystem>
#include <map>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "richness/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "richness");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = richness::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string write_temp(const std::string& name, const std::string& content) {
  const auto dir = fs::temp_directory_path() / "richness_cli_test";
  fs::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << content;
  return path.string();
}

const std::string& example_pairs() {
  static const std::string p = write_temp("example.txt", "1 10\n2 5\n30 3\n");
  return p;
}

std::string data_file(const std::string& name) { return std::string(RICHNESS_DATA_DIR) + "/" + name; }

// Structural equality with a relative tolerance on numbers.
void expect_close(const json& got, const json& want, const std::string& path = "$") {
  if (want.is_number() && got.is_number()) {
    const double a = got.get<double>(), b = want.get<double>();
    EXPECT_LE(std::abs(a - b), 1e-8 * std::max(1.0, std::abs(b))) << path;
    return;
  }
  ASSERT_EQ(got.type_name(), std::string(want.type_name())) << path;
  if (want.is_object()) {
    ASSERT_EQ(got.size(), want.size()) << path;
    for (auto it = want.begin(); it != want.end(); ++it) {
      ASSERT_TRUE(got.contains(it.key())) << path << "." << it.key();
      expect_close(got[it.key()], it.value(), path + "." + it.key());
    }
  } else if (want.is_array()) {
    ASSERT_EQ(got.size(), want.size()) << path;
    for (std::size_t i = 0; i < want.size(); ++i)
      expect_close(got[i], want[i], path + "[" + std::to_string(i) + "]");
  } else {
    EXPECT_EQ(got, want) << path;
  }
}

void check_golden(const std::string& name, const std::string& output) {
  const auto path = fs::path(RICHNESS_GOLDEN_DIR) / name;
  if (std::getenv("RICHNESS_UPDATE_GOLDEN")) {
    std::ofstream(path) << output;
    return;
  }
  std::ifstream in(path);
  ASSERT_TRUE(in) << "missing golden file " << path;
  expect_close(json::parse(output), json::parse(in));
}

std::map<std::string, json> by_name(const json& report) {
  std::map<std::string, json> out;
  for (const auto& e : report["estimators"]) out[e["estimator"].get<std::string>()] = e;
  return out;
}

}  // namespace

TEST(Cli, EstimateWorkedExample) {
  const auto r = run({"estimate", "-i", example_pairs(), "--family", "poisson", "--tau", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_NEAR(j["n_hat"].get<double>(), 28.0, 1e-9);
  EXPECT_NEAR(j["theta_hat"][0].get<double>(), 1.0, 1e-9);
  EXPECT_EQ(j["D"], 18);
  EXPECT_EQ(j["D_tau"], 15);
  EXPECT_NEAR(j["chao"].get<double>(), 28.0, 1e-12);
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_FALSE(j.contains("seed"));
  check_golden("estimate_example.json", r.out);
}

TEST(Cli, EstimateCsv) {
  const auto r = run({"estimate", "-i", example_pairs(), "--tau", "2", "--output-format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("n_hat"), std::string::npos);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 2);
}

TEST(Cli, EstimateWritesOutputFile) {
  const auto target = write_temp("est_out.json", "");
  const auto r = run({"estimate", "-i", example_pairs(), "--tau", "2", "-o", target});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  std::ifstream in(target);
  EXPECT_NEAR(json::parse(in)["n_hat"].get<double>(), 28.0, 1e-9);
}

TEST(Cli, TauBelowMinimumIsInputError) {
  const auto r = run({"estimate", "-i", example_pairs(), "--family", "poisson", "--tau", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.err)["error"]["kind"], "input");
}

TEST(Cli, AutoTauNeedsSeed) {
  EXPECT_EQ(run({"estimate", "-i", example_pairs(), "--tau", "auto"}).code, 2);
  EXPECT_EQ(run({"select-tau", "-i", example_pairs()}).code, 2);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"estimate", "--tau", "2"}).code, 2);
  const auto r = run({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.err)["error"]["kind"], "usage");
  EXPECT_EQ(run({"estimate", "-i", "/nonexistent/file", "--tau", "2"}).code, 2);
  EXPECT_EQ(run({"estimate", "-i", example_pairs(), "--tau", "two"}).code, 2);
  EXPECT_EQ(run({"estimate", "-i", example_pairs(), "--tau", "2", "--family", "gauss"}).code, 2);
}

TEST(Cli, HelpExitsZero) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("estimate"), std::string::npos);
}

TEST(Cli, MalformedInputReportsLine) {
  const auto bad = write_temp("bad.txt", "1 10\n2 x\n");
  const auto r = run({"estimate", "-i", bad, "--tau", "2"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
}

TEST(Cli, NoRareSpeciesIsNumericalError) {
  const auto f = write_temp("abundant.txt", "30 4\n31 2\n");
  const auto r = run({"estimate", "-i", f, "--tau", "2"});
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(json::parse(r.err)["error"]["kind"], "numerical");
}

TEST(Cli, EstimateAutoIncludesTrace) {
  const auto r = run({"estimate", "-i", data_file("table1_sample.txt"), "--tau", "auto", "--seed",
                      "3", "--boot", "20", "--tau-max", "12"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["seed"], 3);
  EXPECT_EQ(j["selected_tau"], j["tau"]);
  EXPECT_TRUE(j["selection"]["records"].is_array());
  check_golden("estimate_auto.json", r.out);
}

TEST(Cli, SelectTauDeterministic) {
  const std::vector<std::string> args{"select-tau", "-i", data_file("table1_sample.txt"),
                                      "--seed", "5", "--boot", "20", "--tau-max", "10"};
  const auto a = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  auto threaded = args;
  threaded.insert(threaded.end(), {"--threads", "3"});
  EXPECT_EQ(run(threaded).out, a.out);
  check_golden("select_tau.json", a.out);
  auto csv = args;
  csv.insert(csv.end(), {"--output-format", "csv"});
  const auto c = run(csv);
  EXPECT_EQ(c.out.substr(0, c.out.find('\n')), "tau,p0_hat,n_hat,var_proxy,bias_proxy,criterion");
}

TEST(Cli, CompareReportsChaoFailure) {
  const auto f = write_temp("no_doubletons.txt", "1 12\n3 4\n4 2\n20 5\n");
  const auto r = run({"compare", "-i", f, "--family", "poisson", "--tau", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto e = by_name(json::parse(r.out));
  EXPECT_TRUE(e.at("chao")["value"].is_null());
  EXPECT_FALSE(e.at("chao")["note"].get<std::string>().empty());
  EXPECT_TRUE(e.at("zelterman")["value"].is_null());
  EXPECT_TRUE(e.at("n_hat")["value"].is_number());
  EXPECT_TRUE(e.at("n_classical")["value"].is_number());
}

TEST(Cli, CompareWorkedExample) {
  const auto r = run({"compare", "-i", example_pairs()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto e = by_name(json::parse(r.out));
  EXPECT_NEAR(e.at("n_hat")["value"].get<double>(), 28.0, 1e-9);
  EXPECT_NEAR(e.at("chao")["value"].get<double>(), 28.0, 1e-12);
  EXPECT_NEAR(e.at("zelterman")["value"].get<double>(), 18.0 / (1.0 - std::exp(-1.0)), 1e-9);
  check_golden("compare_example.json", r.out);
}

TEST(Cli, DiagnoseAtFit) {
  const auto r = run({"diagnose", "-i", data_file("table1_sample.txt"), "--tau", "6"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_LE(j["score_residual"].get<double>(), 1e-8);
  EXPECT_EQ(j["fisher_information"].size(), 2u);
  EXPECT_EQ(j["efficient_scores"].size(), 7u);
  EXPECT_EQ(j["efficient_scores"].back()["x"], "tail");
  check_golden("diagnose.json", r.out);
  const auto away = run({"diagnose", "-i", data_file("table1_sample.txt"), "--tau", "6",
                         "--theta", "1.5", "--q", "0.5"});
  ASSERT_EQ(away.code, 0) << away.err;
  EXPECT_GT(json::parse(away.out)["score_residual"].get<double>(), 1e-3);
  EXPECT_EQ(run({"diagnose", "-i", data_file("table1_sample.txt"), "--tau", "auto"}).code, 2);
}

TEST(Cli, SimulateCsvColumns) {
  const auto r = run({"simulate", "--n", "300", "--q", "0.4", "--theta", "1", "--reps", "4",
                      "--seed", "7", "--tau", "5", "--boot", "10", "--output-format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string header = r.out.substr(0, r.out.find('\n'));
  for (const char* col : {"q", "N", "theta", "mean", "se_over_n", "inf", "sup"})
    EXPECT_NE(("," + header + ",").find(std::string(",") + col + ","), std::string::npos) << col;
}

TEST(Cli, SimulateJsonCarriesSeedAndDesign) {
  const std::vector<std::string> args{"simulate", "--n", "300", "--q", "0.4", "--reps", "4",
                                      "--seed", "7", "--tau", "5", "--boot", "10",
                                      "--per-replicate"};
  const auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["seed"], 7);
  EXPECT_EQ(j["replicates"].size(), 4u);
  EXPECT_EQ(run(args).out, r.out);
  check_golden("simulate.json", r.out);
  EXPECT_EQ(run({"simulate", "--n", "300", "--reps", "4"}).code, 2);
  EXPECT_EQ(run({"simulate", "--n", "300", "--reps", "4", "--seed", "1", "--nuisance", "bogus"}).code,
            2);
}

TEST(Cli, ExtrapolateCurve) {
  const auto r = run({"extrapolate", "-i", data_file("table1_sample.txt"), "--tau", "6", "--gamma",
                      "1,2,4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  const auto& pts = j["curve"]["points"];
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(pts[0]["e_gamma_d"].get<double>(), j["curve"]["base_D"].get<double>());
  EXPECT_GT(pts[2]["e_gamma_d"].get<double>(), pts[1]["e_gamma_d"].get<double>());
  check_golden("extrapolate.json", r.out);
}

TEST(Cli, ExtrapolateTextExperiment) {
  const auto r = run({"extrapolate", "-i", data_file("alice.txt"), "--input-kind", "text", "--tau",
                      "10", "--fractions", "0.5,1", "--output-format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "fraction,gamma,predicted,true,tau_used");
  EXPECT_EQ(run({"extrapolate", "-i", example_pairs(), "--tau", "2", "--fractions", "0.5"}).code, 2);
}
