#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crstd/cli.hpp"
#include "crstd/dataset.hpp"
#include "support/simulate.hpp"

using namespace crstd;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "crstd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / "crstd_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_csv(testing::simulate_raw_prostate(500, 17), dir / "raw.csv");
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("end-to-end pipeline") {
    Workspace ws;
    REQUIRE(run({"prep", "--data", ws.path("raw.csv"), "--out", ws.path("prep.csv")}).code == 0);
    CHECK(fs::exists(ws.path("prep.csv.manifest.json")));
    CHECK(run({"km", "--data", ws.path("prep.csv"), "--out", ws.path("km.csv")}).code == 0);
    CHECK(slurp(ws.path("km.csv")).rfind("time,estimate,n_at_risk,group,cause\n", 0) == 0);
    CHECK(run({"aj", "--data", ws.path("prep.csv"), "--out", ws.path("aj.csv")}).code == 0);

    const auto fp = run({"fit", "--data", ws.path("prep.csv"), "--failure-code", "1", "--covariates",
                         "rx,normalAct,hx", "--df", "3", "--tvc", "rx:2", "--out", ws.path("p.json")});
    CHECK(fp.code == 0);
    CHECK(run({"fit", "--data", ws.path("prep.csv"), "--failure-code", "2", "--covariates",
               "rx,ageCat2,ageCat3", "--out", ws.path("o.json")})
              .code == 0);

    const auto s = run({"standsurv", "--models", ws.path("p.json") + "," + ws.path("o.json"), "--data",
                        ws.path("prep.csv"), "--estimand", "cif", "--at", "rx=0", "--at", "rx=1",
                        "--contrast", "difference", "--timevar", "0:60:13", "--nodes", "20", "--out",
                        ws.path("cif.csv")});
    CHECK(s.code == 0);
    const std::string cif = slurp(ws.path("cif.csv"));
    CHECK(cif.rfind("time,label,cause,estimate,se,lci,uci\n", 0) == 0);
    CHECK(cif.find("at2 - at1") != std::string::npos);
    const auto manifest = nlohmann::json::parse(slurp(ws.path("cif.csv.manifest.json")));
    CHECK(manifest["standardize"]["quadrature_nodes"] == 20);
    CHECK(manifest["command"] == "standsurv");

    const auto rm = run({"standsurv", "--models", ws.path("p.json") + "," + ws.path("o.json"), "--data",
                         ws.path("prep.csv"), "--estimand", "rmft", "--at", "rx=0", "--at", "rx=1",
                         "--lincom", "1,1,0,0", "--t-star", "60", "--out", ws.path("rmft.csv")});
    CHECK(rm.code == 0);
    CHECK(slurp(ws.path("rmft.csv")).find("lincom") != std::string::npos);

    // Identical invocations give identical outputs.
    run({"standsurv", "--models", ws.path("p.json") + "," + ws.path("o.json"), "--data",
         ws.path("prep.csv"), "--estimand", "cif", "--at", "rx=0", "--at", "rx=1", "--contrast",
         "difference", "--timevar", "0:60:13", "--nodes", "20", "--out", ws.path("cif2.csv")});
    CHECK(slurp(ws.path("cif2.csv")) == cif);

    CHECK(run({"recipe", "km-figure1", "--data", ws.path("raw.csv"), "--out", ws.path("rec")}).code == 0);
    CHECK(fs::exists(ws.dir / "rec" / "km_figure1.csv"));
    CHECK(fs::exists(ws.dir / "rec" / "manifest.json"));
  }

  TEST_CASE("validation failures exit with code 2") {
    Workspace ws;
    REQUIRE(run({"prep", "--data", ws.path("raw.csv"), "--out", ws.path("prep.csv")}).code == 0);
    const auto missing = run({"fit", "--data", ws.path("prep.csv"), "--covariates", "rx,nosuch", "--out",
                              ws.path("m.json")});
    CHECK(missing.code == 2);
    CHECK_FALSE(fs::exists(ws.path("m.json")));
    CHECK(run({"fit", "--bogus-flag"}).code == 2);
    CHECK(run({}).code == 2);
    CHECK(run({"recipe", "no-such-recipe", "--data", ws.path("raw.csv"), "--out", ws.path("r")}).code == 2);
    REQUIRE(run({"fit", "--data", ws.path("prep.csv"), "--covariates", "rx", "--out", ws.path("m.json")})
                .code == 0);
    // failure estimand with two models
    CHECK(run({"standsurv", "--models", ws.path("m.json") + "," + ws.path("m.json"), "--data",
               ws.path("prep.csv"), "--estimand", "failure", "--at", "rx=0", "--timevar", "0:60:3",
               "--out", ws.path("x.csv")})
              .code == 2);
    CHECK(run({"standsurv", "--models", ws.path("m.json"), "--data", ws.path("prep.csv"), "--estimand",
               "failure", "--at", "rx=0", "--timevar", "0:60:3", "--t-star", "60", "--out",
               ws.path("x.csv")})
              .code == 2);
    CHECK(run({"fit", "--data", ws.path("nope.csv"), "--out", ws.path("m2.json")}).code == 2);
  }

  TEST_CASE("thread cap from the environment") {
    Workspace ws;
    setenv("CRSTD_THREADS", "zero", 1);
    CHECK(run({"prep", "--data", ws.path("raw.csv"), "--out", ws.path("prep.csv")}).code == 2);
    setenv("CRSTD_THREADS", "2", 1);
    CHECK(run({"prep", "--data", ws.path("raw.csv"), "--out", ws.path("prep.csv")}).code == 0);
    unsetenv("CRSTD_THREADS");
  }

  TEST_CASE("the installed binary reports exit codes") {
    const std::string bin = CRSTD_CLI_PATH;
    CHECK(std::system((bin + " --version > /dev/null").c_str()) == 0);
    const int rc = std::system((bin + " fit --data /nonexistent.csv --out /tmp/x.json 2> /dev/null").c_str());
    CHECK(WEXITSTATUS(rc) == 2);
  }
}
