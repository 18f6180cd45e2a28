#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
};

Result run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" WEFE_BIN "\" " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("wefe_cli_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

json body(const std::string& text) {
  json doc = json::parse(text);
  doc.erase("header");
  return doc;
}

}  // namespace

TEST(Cli, ListsFamilies) {
  const Result r = run("list");
  EXPECT_EQ(r.code, 0);
  EXPECT_GE(std::count(r.out.begin(), r.out.end(), '\n'), 13);
  EXPECT_NE(r.out.find("kundt-3d"), std::string::npos);
  const Result j = run("list --json");
  EXPECT_EQ(j.code, 0);
  const json arr = json::parse(j.out);
  ASSERT_TRUE(arr.is_array());
  EXPECT_GE(arr.size(), 13u);
  EXPECT_TRUE(arr[0].contains("anchor"));
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("verify --family plane-wave-3d --bogus").code, 2);
  EXPECT_EQ(run("verify").code, 2);
  EXPECT_EQ(run("verify --family no-such-family").code, 2);
  EXPECT_EQ(run("verify --family plane-wave-3d --param alpha").code, 2);
  EXPECT_EQ(run("verify --family plane-wave-3d --checks nonsense").code, 2);
  EXPECT_EQ(run("verify --family plane-wave-3d --order 2").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
}

TEST(Cli, VerifyPlaneWavePasses) {
  const Result r = run("verify --family plane-wave-3d --points 20 --param 'alpha=2+sin(v)'");
  EXPECT_EQ(r.code, 0);
  const json doc = json::parse(r.out);
  EXPECT_EQ(doc["aggregate"]["verdict"], "pass");
  EXPECT_EQ(doc["points"].size(), 20u);
}

TEST(Cli, KundtNilpotencyThree) {
  const Result r = run("verify --family kundt-3d --points 20 --seed 7");
  EXPECT_EQ(r.code, 0);
  const json doc = json::parse(r.out);
  EXPECT_EQ(doc["classification"]["nilpotency"], 3);
  EXPECT_EQ(doc["meta"]["seed"], 7);
}

TEST(Cli, BrokenPreconditionExitsOne) {
  const Result r = run("verify --family plane-wave-3d --points 10 --param alpha=v");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(json::parse(r.out)["aggregate"]["verdict"], "fail");
}

TEST(Cli, ExportThenEval) {
  const fs::path cfg = scratch("ds.toml");
  ASSERT_EQ(run("export --family ds-density --param kappa=2 --param Lambda=0.1 --out \"" + cfg.string() + "\"").code, 0);
  const Result r = run("eval --config \"" + cfg.string() + "\" --point 0.1,0.7,0.4 --quantities tau,gh");
  ASSERT_EQ(r.code, 0) << r.out;
  const json doc = json::parse(r.out);
  EXPECT_NEAR(doc["tau"].get<double>(), 1.5, 1e-10);
  for (const auto& row : doc["gh"])
    for (const auto& x : row) EXPECT_LT(std::abs(x.get<double>()), 1e-9);
}

TEST(Cli, EvalFlatAndDomainErrors) {
  const fs::path cfg = scratch("flat.toml");
  write(cfg,
        "[chart]\ncoords = [\"t\", \"x\", \"y\"]\nconstraints = [\"x\"]\n"
        "[metric]\n\"t,t\" = \"-1\"\n\"x,x\" = \"1\"\n\"y,y\" = \"1\"\n"
        "[density]\nh = \"1 + x\"\nlambda = \"0\"\n");
  const Result r = run("eval --config \"" + cfg.string() + "\" --point t=0,x=0.5,y=1 --quantities gh,riemann,weyl");
  ASSERT_EQ(r.code, 0);
  const json doc = json::parse(r.out);
  for (const auto& row : doc["gh"])
    for (const auto& x : row) EXPECT_EQ(x.get<double>(), 0.0);
  EXPECT_TRUE(doc["weyl_vanishes_by_dimension"].get<bool>());
  EXPECT_EQ(run("eval --config \"" + cfg.string() + "\" --point 0,-0.5,1 --quantities tau").code, 3);
  EXPECT_EQ(run("eval --config \"" + cfg.string() + "\" --point 0,0.5 --quantities tau").code, 2);
  EXPECT_EQ(run("eval --config \"" + cfg.string() + "\" --point 0,0.5,1 --quantities cpe").code, 2);
  EXPECT_EQ(run("eval --config /nonexistent/none.toml --point 0,0.5,1").code, 2);
}

TEST(Cli, VerifyConfigFile) {
  const fs::path cfg = scratch("kundt.toml");
  ASSERT_EQ(run("export --family kundt-3d --out \"" + cfg.string() + "\"").code, 0);
  const Result r = run("verify --config \"" + cfg.string() + "\" --points 10");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(r.out)["aggregate"]["verdict"], "pass");
}

TEST(Cli, ReportsAreByteIdentical) {
  const fs::path a = scratch("a.json"), b = scratch("b.json");
  ASSERT_EQ(run("verify --family kundt-3d --points 25 --out \"" + a.string() + "\"").code, 0);
  ASSERT_EQ(run("verify --family kundt-3d --points 25 --out \"" + b.string() + "\"").code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  const Result t1 = run("verify --family kundt-3d --points 25", "WEFE_THREADS=1");
  const Result t4 = run("verify --family kundt-3d --points 25", "WEFE_THREADS=4");
  EXPECT_EQ(t1.out, t4.out);
  EXPECT_EQ(t1.out, slurp(a));
  const Result timed = run("verify --family kundt-3d --points 25 --timing");
  EXPECT_TRUE(json::parse(timed.out)["header"].contains("elapsed_ms"));
  EXPECT_EQ(body(timed.out), body(slurp(a)));
}

TEST(Cli, IdentitiesTable) {
  const Result r = run("identities --family cahen-wallach --points 10");
  EXPECT_EQ(r.code, 0);
  const json doc = json::parse(r.out);
  EXPECT_EQ(doc["verdict"], "pass");
  EXPECT_TRUE(doc["identities"].contains("bianchi_contracted"));
}
