#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using slabsep::cli::Format;
using slabsep::cli::Report;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = slabsep::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> split(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> v;
  for (std::string w; is >> w;) v.push_back(w);
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  static std::mt19937_64 gen(std::random_device{}());
  auto p = fs::temp_directory_path() / ("slabsep_cli_" + name + "_" + std::to_string(gen()));
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Cli, DeriveReportsHighDensityConstants) {
  const auto r = invoke({"derive", "--alpha", "0.6", "--beta", "0.2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_EQ(doc["schema_version"], 1);
  const auto& rec = doc["records"][0];
  EXPECT_DOUBLE_EQ(rec["b"].get<double>(), 4.0);
  EXPECT_NEAR(rec["x_star"].get<double>(), 1.6667, 1e-4);
  EXPECT_EQ(rec["phase"], "high-density");
  EXPECT_TRUE(doc["meta"].contains("version"));
  EXPECT_EQ(doc["meta"]["config"]["alpha"], 0.6);
}

TEST(Cli, UnknownSubcommandPrintsUsage) {
  const auto r = invoke({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_TRUE(r.out.empty());
}

TEST(Cli, UnknownFlagIsUsageError) {
  const auto r = invoke({"derive", "--alpha", "0.6", "--beta", "0.2", "--gamma", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, InvalidRateIsValidationError) {
  const auto r = invoke({"derive", "--alpha", "1.5", "--beta", "0.2"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("alpha"), std::string::npos);
}

TEST(Cli, MissingSubcommandIsUsageError) { EXPECT_EQ(invoke({}).code, 2); }

TEST(Cli, RandomSeedIsPrinted) {
  const auto r = invoke({"simulate", "--alpha", "0.6", "--beta", "0.2", "--n", "4", "--t", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("seed: "), std::string::npos);
  const auto d = invoke({"derive", "--alpha", "0.6", "--beta", "0.2"});
  EXPECT_EQ(d.err.find("seed"), std::string::npos);
}

TEST(Cli, IdenticalRunsGiveIdenticalArtifacts) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  const std::vector<std::string> base = {"experiment", "traversal", "--n-list", "8,10", "--replicas", "30",
                                         "--seed", "42", "--threads", "2"};
  auto args_a = base, args_b = base;
  args_a.insert(args_a.end(), {"--output", a.string()});
  args_b.insert(args_b.end(), {"--output", b.string(), "--threads", "1"});
  args_b.erase(args_b.begin() + 8, args_b.begin() + 10);
  ASSERT_NE(invoke(args_a).code, 2);
  ASSERT_NE(invoke(args_b).code, 2);
  for (const auto* f : {"traversal.csv", "traversal.summary.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_FALSE(fs::exists(a / "traversal.partial.jsonl"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, StdoutRunsAreDeterministic) {
  const std::vector<std::string> args = {"couple", "--alpha", "0.6", "--beta", "0.2", "--n", "8",
                                         "--replicas", "5", "--seed", "3"};
  EXPECT_EQ(invoke(args).out, invoke(args).out);
}

TEST(Cli, EmptyRecordListIsRejected) {
  Report r;
  r.columns = {"a"};
  EXPECT_THROW(slabsep::cli::emit_report(r, Format::Csv), slabsep::cli::ValidationError);
  EXPECT_THROW(slabsep::cli::emit_report(r, Format::Jsonl), slabsep::cli::ValidationError);
  EXPECT_THROW(slabsep::cli::emit_report(r, Format::Json), slabsep::cli::ValidationError);
}

TEST(Cli, JsonlRoundTrip) {
  Report r;
  r.meta = {{"seed", 7}, {"config", {{"alpha", 0.6}}}};
  r.records = {{{"x", 1}, {"y", 0.1}}, {{"x", 2}, {"name", "a,b"}, {"v", nullptr}}, {{"t", 1e-300}}};
  const auto back = slabsep::cli::parse_jsonl(slabsep::cli::emit_report(r, Format::Jsonl));
  EXPECT_EQ(back.records, r.records);
  EXPECT_EQ(back.meta, r.meta);
}

TEST(Cli, CsvColumnOrderIsFixed) {
  Report r;
  r.columns = {"zeta", "alpha", "mid"};
  r.records = {{{"alpha", 1}, {"mid", 2}, {"zeta", 3}}, {{"mid", 5}, {"zeta", 6}, {"alpha", 4}}};
  const auto text = slabsep::cli::emit_report(r, Format::Csv);
  std::istringstream is(text);
  std::string meta, header, row1, row2;
  std::getline(is, meta);
  std::getline(is, header);
  std::getline(is, row1);
  std::getline(is, row2);
  EXPECT_EQ(meta.rfind("# ", 0), 0u);
  EXPECT_EQ(header, "zeta,alpha,mid");
  EXPECT_EQ(row1, "3,1,2");
  EXPECT_EQ(row2, "6,4,5");
}

TEST(Cli, CsvQuotesAndNulls) {
  Report r;
  r.columns = {"a", "b"};
  r.records = {{{"a", "x,\"y\""}, {"b", nullptr}}};
  const auto text = slabsep::cli::emit_report(r, Format::Csv);
  EXPECT_NE(text.find("\"x,\"\"y\"\"\",\n"), std::string::npos) << text;
}

TEST(Cli, HelpListsSubcommandsAndExperiments) {
  const auto r = invoke({"--help"});
  EXPECT_EQ(r.code, 0);
  for (const auto* name : {"derive", "simulate", "couple", "mix-estimate", "lpp", "oracle", "experiment", "scaling",
                           "h-moments", "hitting", "traversal", "certificate", "density", "symmetry"}) {
    EXPECT_NE(r.out.find(name), std::string::npos) << name;
  }
  const auto lpp = invoke({"lpp", "--help"});
  for (const auto* name : {"field", "geodesic", "semi-infinite"}) EXPECT_NE(lpp.out.find(name), std::string::npos);
  const auto oracle = invoke({"oracle", "--help"});
  for (const auto* name : {"stationary", "transient", "mixing"}) EXPECT_NE(oracle.out.find(name), std::string::npos);
}

TEST(Cli, HelpSchemasListsHeaders) {
  const auto r = invoke({"--help", "schemas"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("N,lower,upper,midpoint,ci_lo,ci_hi"), std::string::npos);
  EXPECT_NE(r.out.find("t,site,value"), std::string::npos);
}

TEST(Cli, CsvHeadersMatchSchemas) {
  const auto r = invoke({"simulate", "--alpha", "0.6", "--beta", "0.2", "--n", "3", "--t", "1", "--seed", "1"});
  ASSERT_EQ(r.code, 0);
  std::istringstream is(r.out);
  std::string meta, header;
  std::getline(is, meta);
  std::getline(is, header);
  EXPECT_EQ(header, "t,site,value");
  const auto m = json::parse(meta.substr(2));
  EXPECT_EQ(m["seed"], 1);
  EXPECT_EQ(m["schema_version"], 1);
}

TEST(Cli, HelpExamplesRun) {
  for (const auto& ex : slabsep::cli::examples()) {
    auto args = split(ex);
    args.erase(args.begin());
    args.insert(args.end(), {"--threads", "2"});
    const auto r = invoke(args);
    const bool experiment = args.front() == "experiment";
    if (experiment) {
      EXPECT_TRUE(r.code == 0 || r.code == 3) << ex << "\n" << r.err;
    } else {
      EXPECT_EQ(r.code, 0) << ex << "\n" << r.err;
    }
    EXPECT_FALSE(r.out.empty()) << ex;
  }
}

TEST(Cli, ConfigFileWithFlagOverride) {
  const auto dir = scratch("config");
  fs::create_directories(dir);
  const auto cfg = dir / "run.json";
  std::ofstream(cfg) << R"({"command": ["derive"], "alpha": 0.6, "beta": 0.3})";
  const auto r = invoke({"--config", cfg.string(), "--beta", "0.2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_DOUBLE_EQ(doc["records"][0]["beta"].get<double>(), 0.2);
  EXPECT_DOUBLE_EQ(doc["records"][0]["alpha"].get<double>(), 0.6);
  fs::remove_all(dir);
}

TEST(Cli, ConfigWithUnknownKeyFails) {
  const auto dir = scratch("badcfg");
  fs::create_directories(dir);
  const auto cfg = dir / "run.json";
  std::ofstream(cfg) << R"({"command": ["derive"], "alpha": 0.6, "beta": 0.3, "bogus": 1})";
  EXPECT_EQ(invoke({"--config", cfg.string()}).code, 2);
  fs::remove_all(dir);
}

TEST(Cli, ReplayFromEmbeddedConfig) {
  const auto a = scratch("replay_a"), b = scratch("replay_b");
  const auto first = invoke({"experiment", "symmetry", "--n-list", "4,5", "--replicas", "8", "--burn-in", "5",
                             "--seed", "9", "--output", a.string()});
  ASSERT_EQ(first.code, 0) << first.err;
  const auto replay = invoke({"--config", (a / "symmetry.csv").string(), "--output", b.string()});
  ASSERT_EQ(replay.code, 0) << replay.err;
  EXPECT_EQ(slurp(a / "symmetry.csv"), slurp(b / "symmetry.csv"));
  EXPECT_EQ(slurp(a / "symmetry.summary.json"), slurp(b / "symmetry.summary.json"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, ResumeReusesFinishedUnits) {
  const auto a = scratch("resume_a"), b = scratch("resume_b");
  const std::vector<std::string> base = {"experiment", "traversal", "--n-list", "8,10", "--replicas", "20",
                                         "--seed", "5"};
  auto fresh = base;
  fresh.insert(fresh.end(), {"--output", a.string()});
  ASSERT_NE(invoke(fresh).code, 2);

  // Partial file holding only the N=8 unit, as an interrupted run would leave it.
  auto one = base;
  one[3] = "8";
  one.insert(one.end(), {"--output", b.string()});
  ASSERT_NE(invoke(one).code, 2);
  json config = json::parse(slurp(a / "traversal.summary.json"))["config"];
  std::string unit_line;
  {
    const auto csv = slurp(b / "traversal.csv");
    std::istringstream is(csv);
    std::string meta, header, row;
    std::getline(is, meta);
    std::getline(is, header);
    std::getline(is, row);
    json data = json::parse(R"({"N":8,"m":64})");
    const auto parse_num = [](const std::string& s) { return json::parse(s); };
    std::vector<std::string> cells;
    std::stringstream rs(row);
    for (std::string c; std::getline(rs, c, ',');) cells.push_back(c);
    data["p"] = parse_num(cells[2]);
    data["ci_lo"] = parse_num(cells[3]);
    data["ci_hi"] = parse_num(cells[4]);
    data["successes"] = parse_num(cells[5]);
    data["trials"] = parse_num(cells[6]);
    // A sentinel value proves the unit was read back rather than recomputed.
    data["trials"] = 999;
    unit_line = json{{"unit", "N=8"}, {"data", data}}.dump();
  }
  fs::remove_all(b);
  fs::create_directories(b);
  std::ofstream(b / "traversal.partial.jsonl") << json{{"config", config}}.dump() << '\n' << unit_line << '\n';

  auto resumed = base;
  resumed.insert(resumed.end(), {"--output", b.string(), "--resume"});
  const auto r = invoke(resumed);
  ASSERT_NE(r.code, 2) << r.err;
  const auto csv = slurp(b / "traversal.csv");
  EXPECT_NE(csv.find(",999\n"), std::string::npos);
  EXPECT_FALSE(fs::exists(b / "traversal.partial.jsonl"));
  // Apart from the sentinel the output matches the uninterrupted run.
  auto expected = slurp(a / "traversal.csv");
  const auto pos = expected.find(",20\n");
  ASSERT_NE(pos, std::string::npos);
  expected.replace(pos, 4, ",999\n");
  EXPECT_EQ(csv, expected);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, ResumeRejectsDifferentConfig) {
  const auto dir = scratch("resume_bad");
  fs::create_directories(dir);
  std::ofstream(dir / "traversal.partial.jsonl") << R"({"config":{"seed":1}})" << '\n';
  const auto r = invoke({"experiment", "traversal", "--n-list", "8", "--replicas", "10", "--seed", "5", "--output",
                         dir.string(), "--resume"});
  EXPECT_EQ(r.code, 2);
  fs::remove_all(dir);
}

TEST(Cli, ThresholdFailureExitsThree) {
  // A probability threshold above one cannot be met.
  const auto r = invoke({"experiment", "traversal", "--n-list", "8", "--replicas", "10", "--seed", "5",
                         "--threshold", "1.5"});
  EXPECT_EQ(r.code, 3);
}

TEST(Cli, AtomicWriteLeavesNoTemporary) {
  const auto dir = scratch("atomic");
  slabsep::cli::write_atomic(dir / "x.txt", "hello\n");
  EXPECT_EQ(slurp(dir / "x.txt"), "hello\n");
  EXPECT_FALSE(fs::exists(dir / "x.txt.tmp"));
  fs::remove_all(dir);
}

TEST(Cli, ThreadsEnvironmentFallback) {
  setenv("SLABSEP_THREADS", "nope", 1);
  const auto r = invoke({"couple", "--alpha", "0.6", "--beta", "0.2", "--n", "4", "--replicas", "2", "--seed", "1"});
  unsetenv("SLABSEP_THREADS");
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, BinaryRunsDerive) {
  const std::string cmd = std::string("\"") + SLABSEP_BINARY + "\" derive --alpha 0.6 --beta 0.2 > /dev/null";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  const std::string bad = std::string("\"") + SLABSEP_BINARY + "\" nonsense 2> /dev/null";
  EXPECT_NE(std::system(bad.c_str()), 0);
}
