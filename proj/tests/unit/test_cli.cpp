#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kFixtures = RSICERT_FIXTURES;

struct Run {
  int code = -1;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rsicert_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Run cli(const std::string& args, const fs::path& workdir, const std::string& env = "") {
  const fs::path err = workdir / "stderr.txt";
  const std::string cmd = env + " \"" RSICERT_CLI "\" " + args + " 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

}  // namespace

TEST_CASE("certify exit codes follow the verdict") {
  const auto dir = scratch("verdicts");
  auto b = cli("certify --config " + (kFixtures / "case_b/certify.json").string() + " --out " + (dir / "b").string(), dir);
  CHECK(b.code == 0);
  CHECK(json::parse(slurp(dir / "b/certificate.json")).at("verdict") == "nonsingular-certified");
  for (const char* f : {"report.txt", "p_hat.csv", "envelope_slack.csv", "segments.csv"}) CHECK(fs::exists(dir / "b" / f));

  auto a = cli("certify --config " + (kFixtures / "case_a/certify.json").string() + " --out " + (dir / "a").string(), dir);
  CHECK(a.code == 2);
  CHECK(json::parse(slurp(dir / "a/certificate.json")).at("verdict") == "singular-admissible");
}

TEST_CASE("an empty analysis window is inconclusive") {
  const auto dir = scratch("empty");
  fs::copy(kFixtures / "case_b", dir / "case", fs::copy_options::recursive);
  auto cfg = json::parse(slurp(dir / "case/certify.json"));
  cfg["window"] = {100.0, 200.0};
  write_json(dir / "case/certify.json", cfg);
  auto r = cli("certify --config " + (dir / "case/certify.json").string() + " --out " + (dir / "out").string(), dir);
  CHECK(r.code == 3);
  const auto cert = json::parse(slurp(dir / "out/certificate.json"));
  CHECK(cert.at("verdict") == "inconclusive");
  CHECK(cert.dump().find("empty data window") != std::string::npos);
}

TEST_CASE("certificates are byte-identical across runs and thread caps") {
  const auto dir = scratch("determinism");
  const std::string cfg = (kFixtures / "case_b/certify.json").string();
  REQUIRE(cli("certify --config " + cfg + " --out " + (dir / "r1").string(), dir).code == 0);
  REQUIRE(cli("certify --config " + cfg + " --out " + (dir / "r2").string(), dir, "RSI_CERTIFY_THREADS=1").code == 0);
  REQUIRE(cli("certify --config " + cfg + " --out " + (dir / "r3").string(), dir, "RSI_CERTIFY_THREADS=8").code == 0);
  for (const char* f : {"certificate.json", "report.txt", "p_hat.csv"}) {
    CHECK(slurp(dir / "r1" / f) == slurp(dir / "r2" / f));
    CHECK(slurp(dir / "r1" / f) == slurp(dir / "r3" / f));
  }
}

TEST_CASE("ingest") {
  const auto dir = scratch("ingest");
  const std::string manifest = (kFixtures / "scenarios/ingest.json").string();
  REQUIRE(cli("ingest --config " + manifest + " --out " + (dir / "o1").string(), dir).code == 0);
  REQUIRE(cli("ingest --config " + manifest + " --out " + (dir / "o2").string(), dir, "RSI_CERTIFY_THREADS=1").code ==
          0);
  CHECK(fs::exists(dir / "o1/ingest_report.json"));
  for (const auto& e : fs::directory_iterator(dir / "o1")) {
    CHECK(slurp(e.path()) == slurp(dir / "o2" / e.path().filename()));
  }

  SUBCASE("a malformed file names the file and line and writes nothing") {
    std::ofstream(dir / "bad.csv") << "t,value\n0,1\n1,abc\n2,3\n";
    write_json(dir / "manifest.json",
               {{"series", {{{"path", (kFixtures / "case_b/I.csv").string()}, {"unit", "nat"}, {"name", "I"}},
                            {{"path", "bad.csv"}, {"unit", "nat"}}}}});
    auto r = cli("ingest --config " + (dir / "manifest.json").string() + " --out " + (dir / "o3").string(), dir);
    CHECK(r.code != 0);
    CHECK(r.err.find("bad.csv") != std::string::npos);
    CHECK(r.err.find("line 3") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "o3/ingest_report.json"));
  }
}

TEST_CASE("simulate") {
  const auto dir = scratch("simulate");
  REQUIRE(cli("simulate --config " + (kFixtures / "scenarios/powerlaw.json").string() + " --out " + dir.string(), dir)
              .code == 0);
  const auto sim = json::parse(slurp(dir / "simulation.json"));
  CHECK(sim.at("relative_error").get<double>() < 1e-3);

  write_json(dir / "bad.json", {{"kind", "powerlaw"}, {"I0", 1.0}, {"a0", 1.0}, {"p", 2.0}, {"warp", 9}});
  auto r = cli("simulate --config " + (dir / "bad.json").string() + " --out " + dir.string(), dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("warp") != std::string::npos);
}

TEST_CASE("control-sim keeps the exact-state plant under the ceiling") {
  const auto dir = scratch("control");
  REQUIRE(cli("control-sim --config " + (kFixtures / "scenarios/control.json").string() + " --out " + dir.string(), dir)
              .code == 0);
  const auto summary = json::parse(slurp(dir / "control_summary.json"));
  CHECK(summary.at("final_status") == "completed");
  std::ifstream log(dir / "run_log.jsonl");
  std::string line;
  int n = 0;
  while (std::getline(log, line)) {
    CHECK(json::parse(line).at("I").get<double>() <= 5.0);
    ++n;
  }
  CHECK(n > 0);
}

TEST_CASE("report renders an existing certificate") {
  const auto dir = scratch("report");
  REQUIRE(cli("certify --config " + (kFixtures / "case_b/certify.json").string() + " --out " + dir.string(), dir).code ==
          0);
  auto r = cli("report --config " + (dir / "certificate.json").string() + " --out " + (dir / "r").string(), dir);
  CHECK(r.code == 0);
}

TEST_CASE("bad arguments exit with 1") {
  const auto dir = scratch("args");
  CHECK(cli("certify", dir).code == 1);
  CHECK(cli("certify --config /nonexistent.json", dir).code == 1);
  CHECK(cli("estimate --config x --format xml", dir).code == 1);
}
