#include "helpers.hpp"

#include "cli.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <sstream>

namespace stme {
namespace {

using test::read_text;
using test::TempDir;
using test::write_text;

struct Run {
  int code{0};
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t data_rows(const std::filesystem::path& path) {
  const auto text = read_text(path);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) - 1;
}

class CliWorld : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    const auto r = run({"synth", "--years", "400", "--seed", "3", "--out", (*dir_ / "world").string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  std::vector<std::string> catalog_args(const std::string& duration = "400") const {
    return {"--footprints", (*dir_ / "world" / "footprints.csv").string(), "--locations",
            (*dir_ / "world" / "locations.csv").string(), "--duration", duration};
  }
  std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) const {
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  }
  static TempDir* dir_;
};

TempDir* CliWorld::dir_ = nullptr;

TEST_F(CliWorld, SynthWritesLoadableCatalog) {
  const auto world = *dir_ / "world";
  EXPECT_EQ(data_rows(world / "locations.csv"), 35u);
  EXPECT_EQ(data_rows(world / "footprints.csv"), 240u * 35u);
  const auto meta = nlohmann::json::parse(read_text(world / "synth.meta.json"));
  EXPECT_EQ(meta["command"], "synth");
  EXPECT_EQ(meta["config"]["synth"]["seed"], "3");
  EXPECT_TRUE(meta.contains("version"));
}

TEST_F(CliWorld, SynthIsReproducible) {
  TempDir d("synth");
  ASSERT_EQ(run({"synth", "--years", "50", "--seed", "7", "--out", (d / "a").string()}).code, 0);
  ASSERT_EQ(run({"synth", "--years", "50", "--seed", "7", "--out", (d / "b").string()}).code, 0);
  EXPECT_EQ(read_text(d / "a" / "footprints.csv"), read_text(d / "b" / "footprints.csv"));
  const auto r = run({"synth", "--years", "3200", "--rate", "0.6", "--out", (d / "c").string()});
  EXPECT_NE(r.out.find("events: 1920"), std::string::npos) << r.out;
}

TEST_F(CliWorld, StmWritesSeriesAndExposures) {
  TempDir d("stm");
  const auto r = run(with({"stm"}, with(catalog_args(), {"--out", d.path().string()})));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(data_rows(d / "stm.csv"), 240u);
  EXPECT_EQ(data_rows(d / "exposures.csv"), 240u * 35u);
  EXPECT_NE(r.out.find("stm range"), std::string::npos);
}

TEST_F(CliWorld, MissingLocationsFileIsAUsageError) {
  TempDir d("missing");
  const auto r = run({"stm", "--footprints", (*dir_ / "world" / "footprints.csv").string(),
                      "--locations", (d / "nope.csv").string(), "--duration", "10", "--out",
                      d.path().string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope.csv"), std::string::npos) << r.err;
  EXPECT_FALSE(std::filesystem::exists(d / "stm.csv"));
}

TEST_F(CliWorld, FitReportsBothMethods) {
  TempDir d("fit");
  const auto r = run(with({"fit"}, with(catalog_args(), {"--n", "40", "--method", "mle,pwm",
                                                          "--out", d.path().string()})));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(read_text(d / "fit.json"));
  EXPECT_EQ(doc["fits"].size(), 2u);
  EXPECT_EQ(doc["n"], 40);
  EXPECT_EQ(run(with({"fit"}, with(catalog_args(), {"--n", "4000"}))).code, 2);
}

TEST_F(CliWorld, ReturnValuesTwoMethodsInOneFile) {
  TempDir d("rv");
  const auto r = run(with({"return-values"},
                          with(catalog_args(), {"--T", "1000", "--n", "30", "--method", "pwm",
                                                "--method", "mle", "--location", "1,2,3", "--out",
                                                d.path().string()})));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(data_rows(d / "estimates.csv"), 6u);
  const auto text = read_text(d / "estimates.csv");
  EXPECT_NE(text.find(",STME,PWM,30,1000,400,"), std::string::npos);
  EXPECT_NE(text.find(",STME,MLE,30,1000,400,"), std::string::npos);
}

TEST_F(CliWorld, ReturnValuesSingleEqualsStmeOnOneLocationRegion) {
  TempDir d("rv1");
  const auto r = run(with({"return-values"},
                          with(catalog_args(), {"--T", "1000", "--n", "30", "--ids", "5",
                                                "--estimator", "stme,single", "--out",
                                                d.path().string()})));
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(read_text(d / "estimates.csv"));
  std::string line;
  std::getline(in, line);
  std::vector<double> values;
  while (std::getline(in, line)) {
    const auto parts = [&] {
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string x;
      while (std::getline(ss, x, ',')) f.push_back(x);
      return f;
    }();
    values.push_back(std::stod(parts[6]));
  }
  ASSERT_EQ(values.size(), 2u);
  EXPECT_NEAR(values[0], values[1], 2e-6);
}

TEST_F(CliWorld, ReturnValuesT0AliasAndValidation) {
  TempDir d("rv2");
  auto args = catalog_args();
  args[4] = "--T0";
  args[5] = "200";
  const auto r = run(with({"return-values"},
                          with(args, {"--T", "500", "--n", "30", "--location", "4", "--out",
                                      d.path().string()})));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(read_text(d / "estimates.csv").find(",500,200,"), std::string::npos);
  EXPECT_EQ(run(with({"return-values"}, with(catalog_args(), {"--T", "100"}))).code, 2);
  EXPECT_EQ(run(with({"return-values"}, with(catalog_args(), {"--method", "lmom"}))).code, 2);
}

TEST_F(CliWorld, DiagnosticsEchoesBandAndWritesTauMap) {
  TempDir d("diag");
  const auto r = run(with({"diagnostics"},
                          with(catalog_args(), {"--band", "0.95", "--n-perm", "99", "--n-null",
                                                "100", "--kl-location", "1,2", "--out",
                                                d.path().string()})));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(read_text(d / "diagnostics.json"));
  EXPECT_DOUBLE_EQ(doc["tau"]["band"].get<double>(), 0.95);
  EXPECT_EQ(doc["trend"].size(), 4u);
  EXPECT_EQ(doc["kl"].size(), 2u);
  EXPECT_EQ(data_rows(d / "tau_map.csv"), 35u);
  EXPECT_NE(r.out.find("tau band: 0.95"), std::string::npos);
}

TEST_F(CliWorld, ConfigFileAndFlagOverride) {
  TempDir d("cfg");
  write_text(d / "run.ini",
             "[catalog]\n"
             "footprints = " + (*dir_ / "world" / "footprints.csv").string() + "\n"
             "locations = " + (*dir_ / "world" / "locations.csv").string() + "\n"
             "duration = 400\n"
             "[evd]\n"
             "n = 25\n"
             "method = pwm\n"
             "[stme]\n"
             "T = 1000\n"
             "locations = 1,2\n"
             "[experiments]\n"
             "replicates = 7\n");
  const auto r = run({"return-values", "--config", (d / "run.ini").string(), "--n", "35", "--out",
                      d.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto text = read_text(d / "estimates.csv");
  EXPECT_NE(text.find("1,STME,PWM,35,1000,400,"), std::string::npos) << text;
  EXPECT_EQ(data_rows(d / "estimates.csv"), 2u);
  const auto meta = nlohmann::json::parse(read_text(d / "return-values.meta.json"));
  EXPECT_EQ(meta["config"]["evd"]["n"], "35");
  EXPECT_EQ(meta["config"]["evd"]["method"], "pwm");

  write_text(d / "bad.ini", "[evd]\nshape_prior = 1\n");
  const auto bad = run({"return-values", "--config", (d / "bad.ini").string()});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("evd.shape_prior"), std::string::npos);
}

TEST_F(CliWorld, ExperimentSmokeAndDeterminism) {
  TempDir d("exp");
  const auto args = with({"experiment"},
                         with(catalog_args(), {"--T0", "200", "--T", "300", "--n", "20",
                                               "--replicates", "2", "--location", "1,9",
                                               "--seed", "5"}));
  const auto a = run(with(args, {"--jobs", "1", "--out", (d / "a").string()}));
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = run(with(args, {"--jobs", "2", "--out", (d / "b").string()}));
  ASSERT_EQ(b.code, 0) << b.err;
  for (const char* f : {"results.csv", "summary.csv", "metrics.csv", "empirical.csv"}) {
    ASSERT_TRUE(std::filesystem::exists(d / "a" / f)) << f;
    EXPECT_EQ(read_text(d / "a" / f), read_text(d / "b" / f)) << f;
  }
  EXPECT_TRUE(std::filesystem::exists(d / "a" / "experiment.meta.json"));
  // 2 replicates x 2 estimators x 2 methods x 1 n x 2 locations
  EXPECT_EQ(data_rows(d / "a" / "results.csv"), 16u);

  // Rerun into the same directory: every replicate is reused.
  const auto again = run(with(args, {"--out", (d / "a").string()}));
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(again.err.find("done"), std::string::npos) << again.err;
  EXPECT_EQ(read_text(d / "a" / "results.csv"), read_text(d / "b" / "results.csv"));
}

TEST_F(CliWorld, ExperimentLadderColumns) {
  TempDir d("ladder");
  const auto r = run({"experiment", "--synth-years", "400", "--T0", "100", "--T", "200",
                      "--replicates", "2", "--location", "3", "--out", d.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto text = read_text(d / "metrics.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "method,quantity,n=20,n=30,n=40,n=50,n=60");
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"bogus"}).code, 2);
  EXPECT_EQ(run({"stm", "--no-such-flag"}).code, 2);
  EXPECT_EQ(run({"stm"}).code, 2);  // missing inputs
  EXPECT_EQ(run({"synth", "--spacing", "0"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

}  // namespace
}  // namespace stme
