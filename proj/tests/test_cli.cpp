#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"
#include "obcbf/report.hpp"

namespace fs = std::filesystem;

namespace obcbf {
namespace {

std::string di_path() { return bundled_scenario("double_integrator.toml"); }

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("obcbf_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(OBCBF_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

TEST(ConfigDocument, SectionsCommentsAndArrays) {
  const auto doc = ConfigDocument::parse(
      "# header\n[a]\nx = 1.5   # trailing\nname = hello\n\n[b]\nm = [[1, 2],\n     [3, 4]]\nv = [5, -6e-1]\n");
  EXPECT_DOUBLE_EQ(doc.number("a", "x"), 1.5);
  EXPECT_EQ(doc.text("a", "name"), "hello");
  EXPECT_EQ(doc.matrix("b", "m"), (Matrix{{1, 2}, {3, 4}}));
  EXPECT_EQ(doc.vector("b", "v"), (Vector{{5.0, -0.6}}));
  EXPECT_DOUBLE_EQ(doc.number_or("a", "missing", 7.0), 7.0);
  EXPECT_TRUE(doc.unused().empty());
}

TEST(ConfigDocument, DiagnosticsCarryLineNumbers) {
  EXPECT_NE(error_of([] { ConfigDocument::parse("[a]\nx = 1\nx = 2\n", "f.toml"); }).find("f.toml:3"),
            std::string::npos);
  EXPECT_NE(error_of([] { ConfigDocument::parse("[a]\njunk line\n", "f.toml"); }).find("f.toml:2"), std::string::npos);
  const auto doc = ConfigDocument::parse("[a]\n\nx = abc\n", "f.toml");
  EXPECT_NE(error_of([&] { doc.number("a", "x"); }).find("f.toml:3"), std::string::npos);
  EXPECT_THROW(ConfigDocument::parse("[a]\nm = [1, 2\n"), ConfigError);
}

TEST(ConfigDocument, Overrides) {
  auto doc = ConfigDocument::parse("[a]\nx = 1\n");
  doc.apply_override("a.x=3");
  EXPECT_DOUBLE_EQ(doc.number("a", "x"), 3.0);
  EXPECT_THROW(doc.apply_override("a.y=3"), ConfigError);
  EXPECT_THROW(doc.apply_override("novalue"), ConfigError);
  doc.apply_override("a.y=4", true);
  EXPECT_DOUBLE_EQ(doc.number("a", "y"), 4.0);
}

TEST(ParseNumericArray, Shapes) {
  EXPECT_EQ(parse_numeric_array("3"), Matrix::Constant(1, 1, 3.0));
  EXPECT_EQ(parse_numeric_array("[1, 2]"), (Matrix{{1.0}, {2.0}}));
  EXPECT_EQ(parse_numeric_array("[[1], [2]]"), (Matrix{{1.0}, {2.0}}));
  EXPECT_THROW(parse_numeric_array("[[1, 2], [3]]"), std::invalid_argument);
  EXPECT_THROW(ConfigDocument::parse("[a]\nm = [[1, 2], [3]]\n").matrix("a", "m"), ConfigError);
}

TEST(Scenario, BundledFilesLoadAndCertify) {
  for (const char* name : {"double_integrator.toml", "spacecraft.toml", "spacecraft_vanilla.toml"}) {
    const auto sc = build_scenario(load_scenario(bundled_scenario(name)));
    EXPECT_NO_THROW(sc->require_certified()) << name;
    EXPECT_FALSE(sc->certificates.empty());
  }
}

TEST(Scenario, UnknownKeysAndMissingFilesAreConfigErrors) {
  EXPECT_THROW(load_scenario("/nonexistent/missing.toml"), ConfigError);
  EXPECT_THROW(load_scenario(di_path(), {"filter.no_such_key=1"}), ConfigError);
  EXPECT_THROW(load_scenario(di_path(), {"filter.mode=bogus"}), ConfigError);
  const fs::path dir = scratch("unknown_key");
  std::ifstream in(di_path());
  std::stringstream text;
  text << in.rdbuf() << "\n[run]\n";
  std::ofstream(dir / "bad.toml") << text.str() << "typo_key = 1\n";
  const std::string msg = error_of([&] { load_scenario((dir / "bad.toml").string()); });
  EXPECT_NE(msg.find("typo_key"), std::string::npos) << msg;
}

TEST(Scenario, CertificationFailureNamesInequality) {
  const auto sc = build_scenario(load_scenario(di_path(), {"estimator.eb=1.0"}));
  const std::string msg = error_of([&] { sc->require_certified(); });
  EXPECT_NE(msg.find("backup gain robust invariance"), std::string::npos) << msg;
  EXPECT_THROW(sc->require_certified(), CertificationError);
}

TEST(Scenario, PrimaryIsCosine) {
  const auto sc = build_scenario(load_scenario(di_path()));
  for (double t : {0.0, 0.7, 3.0}) EXPECT_NEAR(sc->primary(t)(0), 2.0 * std::sin(t), 1e-12);
}

TEST(Report, TrajectoryCsvRoundTripsExactly) {
  const auto sc = build_scenario(load_scenario(di_path(), {"run.t_final=1"}));
  const SimLog log = run_scenario(*sc);
  std::stringstream csv;
  write_trajectory_csv(csv, log);
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "t,x_1,x_2,xhat_1,xhat_2,y_1,u_1,h,h_b,e_norm,delta_x,mode");
  size_t k = 0;
  while (std::getline(csv, line)) {
    ASSERT_LT(k, log.steps.size());
    std::vector<std::string> cells;
    std::stringstream row(line);
    for (std::string c; std::getline(row, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 12u);
    const StepRecord& r = log.steps[k];
    EXPECT_EQ(std::strtod(cells[0].c_str(), nullptr), r.t);
    EXPECT_EQ(std::strtod(cells[1].c_str(), nullptr), r.x(0));
    EXPECT_EQ(std::strtod(cells[2].c_str(), nullptr), r.x(1));
    EXPECT_EQ(std::strtod(cells[4].c_str(), nullptr), r.xhat(1));
    EXPECT_EQ(std::strtod(cells[5].c_str(), nullptr), r.y(0));
    EXPECT_EQ(std::strtod(cells[6].c_str(), nullptr), r.u(0));
    EXPECT_EQ(std::strtod(cells[7].c_str(), nullptr), r.h);
    EXPECT_EQ(std::strtod(cells[9].c_str(), nullptr), r.e_norm);
    EXPECT_EQ(cells[11], to_string(r.mode));
    ++k;
  }
  EXPECT_EQ(k, log.steps.size());
}

TEST(Report, SummaryJsonAndMargins) {
  const auto sc = build_scenario(load_scenario(di_path(), {"run.t_final=0.5"}));
  const SimLog log = run_scenario(*sc);
  const MonitorReport rep = monitor(log, *sc);
  const auto j = nlohmann::json::parse(summary_json(log, rep, *sc));
  EXPECT_EQ(j["scenario"], "double_integrator");
  EXPECT_EQ(j["all_monitors_pass"], rep.all_pass());
  EXPECT_EQ(j["monitors"].size(), rep.verdicts.size());
  EXPECT_EQ(j["summary"]["steps"], 25);
  EXPECT_EQ(j["certificates"].size(), sc->certificates.size());
  std::stringstream margins;
  write_margins_csv(margins, log, sc->cfg.delta, sc->cfg.horizon);
  std::string header;
  std::getline(margins, header);
  EXPECT_EQ(header, "t,row,tau,margin,tightened_margin");
  int lines = 0;
  for (std::string l; std::getline(margins, l);) ++lines;
  EXPECT_EQ(lines, 25 * (grid_intervals(sc->cfg.horizon, sc->cfg.delta) + 2));
}

TEST(Cli, RunWritesArtifactsAndExitsZero) {
  const fs::path out = scratch("run_ok");
  EXPECT_EQ(run_cli("run " + di_path() + " --set run.t_final=2 --seed 3 --quiet --out " + out.string()), 0);
  for (const char* f : {"trajectory.csv", "margins.csv", "summary.json"}) EXPECT_TRUE(fs::exists(out / f)) << f;
}

TEST(Cli, BaselineRunFailsMonitorsButWritesFiles) {
  const fs::path out = scratch("run_baseline");
  EXPECT_EQ(run_cli("run " + bundled_scenario("spacecraft_vanilla.toml") + " --quiet --out " + out.string()), 1);
  EXPECT_TRUE(fs::exists(out / "summary.json"));
  std::ifstream in(out / "summary.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_FALSE(j["all_monitors_pass"].get<bool>());
}

TEST(Cli, ConfigurationErrorsExitTwo) {
  EXPECT_EQ(run_cli("run missing.toml"), 2);
  EXPECT_EQ(run_cli("run " + di_path() + " --set filter.nope=1"), 2);
  EXPECT_EQ(run_cli("run " + di_path() + " --set estimator.eb=1.0"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
}

TEST(Cli, CheckReportsCertificates) {
  EXPECT_EQ(run_cli("check " + bundled_scenario("spacecraft.toml")), 0);
  EXPECT_EQ(run_cli("check " + di_path() + " --set estimator.eb=1.0"), 2);
}

TEST(Cli, SweepWritesIndex) {
  const fs::path out = scratch("sweep");
  EXPECT_EQ(run_cli("sweep " + di_path() + " --key noise.seed --values 1,2,3 --set run.t_final=1 --quiet --out " +
                    out.string()),
            0);
  std::ifstream index(out / "index.csv");
  int lines = 0;
  for (std::string l; std::getline(index, l);) ++lines;
  EXPECT_EQ(lines, 4);
  EXPECT_TRUE(fs::exists(out / "run_2" / "trajectory.csv"));
}

}  // namespace
}  // namespace obcbf
