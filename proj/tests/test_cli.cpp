// End-to-end runs of the command-line tool.

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <map>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const std::string kCli = V2SPIN_CLI_PATH;
const std::string kData = V2SPIN_DATA_DIR;

class Cli : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("v2spin_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  /// Runs the tool and returns its exit status; stderr goes to err.txt.
  int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + kCli + " " + args + " 2>" + (dir / "err.txt").string() + " >" + (dir / "stdout.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string out(const std::string& name) const {
    std::ifstream in(dir / name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_F(Cli, HelpForEverySubcommand) {
  for (const char* sub : {"levels", "transitions", "spectrum", "fit", "enhance", "dnp", "assign", "rabi", "ramsey"}) {
    EXPECT_EQ(run(std::string(sub) + " --help"), 0) << sub;
    EXPECT_NE(out("stdout.txt").find("--out"), std::string::npos) << sub;
  }
}

TEST_F(Cli, UnknownFlagIsUsageError) {
  EXPECT_EQ(run("levels --frobnicate 3"), 1);
  EXPECT_EQ(run("teleport"), 1);
  EXPECT_EQ(run(""), 1);
}

TEST_F(Cli, EmptyFieldRangeIsUsageError) {
  EXPECT_EQ(run("levels --B-start 10 --B-stop 10"), 1);
  EXPECT_NE(out("err.txt").find("empty B-range"), std::string::npos);
}

TEST_F(Cli, LevelsCrossNearGslac) {
  ASSERT_EQ(run("levels --B-start 0 --B-stop 50 --B-step 0.5 -o " + path("levels.csv")), 0);
  const auto csv = out("levels.csv");
  EXPECT_EQ(csv.rfind("B_G,label,E_MHz\n", 0), 0u);
  // Locate where E(-3/2) - E(-1/2) changes sign.
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::map<double, std::map<std::string, double>> e;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string b, label, v;
    std::getline(ls, b, ',');
    std::getline(ls, label, ',');
    std::getline(ls, v, ',');
    e[std::stod(b)][label] = std::stod(v);
  }
  double crossing = -1.0, prev_b = 0.0, prev_d = 0.0;
  for (const auto& [b, lv] : e) {
    const double d = lv.at("|-3/2>") - lv.at("|-1/2>");
    if (b > 0.0 && prev_d > 0.0 && d <= 0.0) crossing = prev_b;
    prev_b = b;
    prev_d = d;
  }
  EXPECT_NEAR(crossing, 25.0, 0.6);
  EXPECT_TRUE(fs::exists(path("levels.csv.manifest.json")));
}

TEST_F(Cli, ManifestRecordsInputsAndDefaults) {
  ASSERT_EQ(run("transitions -s " + kData + "/si2_system.json --B 150 -o " + path("t.csv")), 0);
  const auto m = nlohmann::json::parse(out("t.csv.manifest.json"));
  EXPECT_EQ(m["command"], "transitions");
  EXPECT_EQ(m["inputs"].size(), 1u);
  EXPECT_EQ(m["inputs"][0]["fnv1a64"].get<std::string>().size(), 16u);
  EXPECT_TRUE(m["settings"]["constants"].contains("gamma_e_MHzPerG"));
  EXPECT_FALSE(fs::exists(path("t.csv.tmp")));
  EXPECT_EQ(out("t.csv").rfind("kind,label,branch,freq_MHz,moment\n", 0), 0u);
}

TEST_F(Cli, FitBundledDataset) {
  ASSERT_EQ(run("fit -p " + kData + "/si2_fit_dataset.json -o " + path("fit.json") + " --residuals-out " + path("res.csv")), 0)
      << out("err.txt");
  const auto j = nlohmann::json::parse(out("fit.json"));
  EXPECT_NEAR(j["params"]["B"]["value"].get<double>(), 36.83, 1e-3);
  EXPECT_NEAR(j["params"]["D"]["value"].get<double>(), 34.89, 1e-3);
  EXPECT_TRUE(j["converged"].get<bool>());
  EXPECT_TRUE(j["covariance"].is_array());
  EXPECT_EQ(out("res.csv").rfind("key,measured_MHz,residual_MHz\n", 0), 0u);
}

TEST_F(Cli, NonIdentifiableFitExitsWithTwo) {
  nlohmann::json p = nlohmann::json::parse(std::ifstream(kData + "/si2_fit_dataset.json"));
  p["free_params"] = {"A_xx", "A_yy"};
  p.erase("initial_guess");
  nlohmann::json one = nlohmann::json::array();
  one.push_back(p["measurements"][1]);
  p["measurements"] = one;
  std::ofstream(path("p.json")) << p.dump();
  EXPECT_EQ(run("fit -p " + path("p.json")), 2);
  EXPECT_NE(out("err.txt").find("null direction"), std::string::npos);
}

TEST_F(Cli, MalformedInputIsValidationError) {
  std::ofstream(path("bad.json")) << "{\n \"D_MHz\": 35,\n \"nuclei\": [ {\"isotope\": \"Si29\", \"A_MHz\": {\"xx\": 1}} ]\n}";
  EXPECT_EQ(run("transitions --B 10 -s " + path("bad.json")), 1);
  EXPECT_NE(out("err.txt").find("$.nuclei[0].A_MHz.yy"), std::string::npos) << out("err.txt");
  std::ofstream(path("broken.json")) << "{\n\n  oops\n}";
  EXPECT_EQ(run("transitions --B 10 -s " + path("broken.json")), 1);
  EXPECT_NE(out("err.txt").find(":3:"), std::string::npos) << out("err.txt");
}

TEST_F(Cli, EnhanceCurveShape) {
  ASSERT_EQ(run("enhance -s " + kData + "/si4_system.json --B-start 0 --B-stop 150 --method analytic -o " + path("e.csv")), 0);
  std::istringstream in(out("e.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "mS,B_G,alpha");
  double best = 0.0, best_b = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    const double b = std::stod(line.substr(c1 + 1, c2 - c1 - 1)), a = std::stod(line.substr(c2 + 1));
    if (std::abs(a) > best) {
      best = std::abs(a);
      best_b = b;
    }
  }
  EXPECT_EQ(rows, 151);
  EXPECT_NEAR(best_b, 26.0, 1.0);
}

TEST_F(Cli, AssignRanksSiliconII) {
  ASSERT_EQ(run("assign --splitting 8.66 --B 150"), 0);
  const auto j = nlohmann::json::parse(out("stdout.txt"));
  EXPECT_EQ(j["candidates"][0]["group"], "Si_II");
}

TEST_F(Cli, DeterministicOutputs) {
  const std::string args = "assign --splitting 2.2 --B 150 --occupancy 2000 --seed 11 --histogram-out ";
  ASSERT_EQ(run(args + path("h1.csv") + " -o " + path("a1.json")), 0);
  ASSERT_EQ(run(args + path("h2.csv") + " -o " + path("a2.json")), 0);
  EXPECT_EQ(out("h1.csv"), out("h2.csv"));
  EXPECT_EQ(out("a1.json"), out("a2.json"));
  ASSERT_EQ(run("spectrum -s " + kData + "/si2_system.json --B 150 --noise 0.05 --seed 3 -o " + path("s1.csv")), 0);
  ASSERT_EQ(run("spectrum -s " + kData + "/si2_system.json --B 150 --noise 0.05 --seed 3 -o " + path("s2.csv")), 0);
  EXPECT_EQ(out("s1.csv"), out("s2.csv"));
}

TEST_F(Cli, ConstantsFileFromEnvironment) {
  std::ofstream(path("c.json")) << R"({"D_MHz": 50.0})";
  ASSERT_EQ(run("levels --B-start 0 --B-stop 1 -o " + path("l.csv"), "V2SPIN_CONSTANTS=" + path("c.json")), 0);
  const auto m = nlohmann::json::parse(out("l.csv.manifest.json"));
  EXPECT_EQ(m["settings"]["constants"]["D_MHz"], 50.0);
  EXPECT_EQ(m["settings"]["constants"]["source"], path("c.json"));
  // Top level at B=0 is D(9/4 + 5/4) = 3.5 D.
  EXPECT_NE(out("l.csv").find("0,|+3/2>,175"), std::string::npos) << out("l.csv");
}

TEST_F(Cli, DnpRabiRamseyProduceTraces) {
  ASSERT_EQ(run("dnp -s " + kData + "/si4_system.json --B 37 --t-stop 100 --t-step 5 --format json -o " + path("d.json") +
                " --rates-out " + path("r.json")),
            0)
      << out("err.txt");
  const auto d = nlohmann::json::parse(out("d.json"));
  EXPECT_GT(d["r_squared"].get<double>(), 0.99);
  EXPECT_EQ(d["points"].size(), 21u);
  EXPECT_TRUE(nlohmann::json::parse(out("r.json")).contains("rates"));
  ASSERT_EQ(run("rabi --omega 0.5 --t-stop 2 --t-step 1 -o " + path("rabi.csv")), 0);
  {
    // Full inversion after 1/(2 Omega) = 1 us, back to zero at 2 us.
    std::istringstream in(out("rabi.csv"));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t_us,signal");
    std::vector<double> v;
    while (std::getline(in, line)) v.push_back(std::stod(line.substr(line.find(',') + 1)));
    ASSERT_EQ(v.size(), 3u);
    EXPECT_NEAR(v[0], 0.0, 1e-12);
    EXPECT_NEAR(v[1], 1.0, 1e-12);
    EXPECT_NEAR(v[2], 0.0, 1e-12);
  }
  ASSERT_EQ(run("ramsey --detuning 0 --t2star 1 --t-stop 1 --t-step 1"), 0);
  EXPECT_EQ(out("stdout.txt").rfind("t_us,signal\n0,1\n", 0), 0u);
  EXPECT_EQ(run("dnp --B 37"), 1);
}
