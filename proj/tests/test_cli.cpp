#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "scratch.hpp"

using json = nlohmann::json;
using mutforge::testing::data_dir;
using mutforge::testing::ScratchDir;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run cli(const ScratchDir& tmp, const std::string& args) {
  auto out = tmp.path() / "stdout.txt";
  auto err = tmp.path() / "stderr.txt";
  std::string cmd = std::string("'") + MUTFORGE_CLI + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::size_t line_count(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("cli: experiment reruns are identical") {
  ScratchDir tmp;
  auto cfg = q(data_dir() / "run.example.toml");
  auto a = cli(tmp, "experiment --config " + cfg + " --seed 7 --out-dir " + q(tmp.path() / "a"));
  REQUIRE_MESSAGE(a.code == 0, a.err);
  auto b = cli(tmp, "--config " + cfg + " --seed 7 --workers 1 --out-dir " + q(tmp.path() / "b") + " experiment");
  REQUIRE_MESSAGE(b.code == 0, b.err);
  auto ra = slurp(tmp.path() / "a" / "report.json");
  CHECK_FALSE(ra.empty());
  CHECK(ra == slurp(tmp.path() / "b" / "report.json"));
  CHECK(json::parse(ra)["seed"] == 7);
  auto manifest = json::parse(slurp(tmp.path() / "a" / "manifest.json"));
  CHECK(manifest["config"]["seed"] == 7);

  auto c = cli(tmp, "compare " + q(tmp.path() / "a" / "report.json") + " -o " + q(tmp.path() / "cmp.md"));
  REQUIRE_MESSAGE(c.code == 0, c.err);
  CHECK(slurp(tmp.path() / "cmp.md") == slurp(tmp.path() / "a" / "summary.md"));
}

TEST_CASE("cli: stage commands") {
  ScratchDir tmp;
  auto bug = q(data_dir() / "fixtures" / "bug-002");
  auto out = q(tmp.path() / "o");
  auto pool = tmp.path() / "o" / "pool-bug-002-rules.json";

  auto r = cli(tmp, "--out-dir " + out + " generate --bug " + bug + " --generator rules");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  REQUIRE(fs::exists(pool));
  auto unclassified = json::parse(slurp(pool));
  CHECK(unclassified["records"][0]["status"]["kind"] == "Pending");

  r = cli(tmp, "filter --bug " + bug + " --pool " + q(pool));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("viable=") != std::string::npos);
  CHECK(json::parse(slurp(pool))["records"][0]["status"]["kind"] != "Pending");

  r = cli(tmp, "metrics --bug " + bug + " --pool " + q(pool));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  auto no_matrix = json::parse(r.out);
  CHECK(no_matrix["behavior"]["computed"] == false);
  CHECK(no_matrix["usability"]["cr"].is_number());

  r = cli(tmp, "--out-dir " + out + " execute --bug " + bug + " --pool " + q(pool));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  auto matrix = tmp.path() / "o" / "killmatrix-bug-002-rules.csv";
  REQUIRE(fs::exists(matrix));
  CHECK(slurp(matrix).find("#baseline") != std::string::npos);

  auto report = tmp.path() / "report.json";
  r = cli(tmp, "metrics --bug " + bug + " --pool " + q(pool) + " --matrix " + q(matrix) + " -o " + q(report));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  auto with_matrix = json::parse(slurp(report));
  CHECK(with_matrix["behavior"]["computed"] == true);
  CHECK(with_matrix["behavior"]["mutation_score"].is_number());

  r = cli(tmp, "--out-dir " + out + " sample --pool " + q(pool));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  auto sample = tmp.path() / "o" / "sample-bug-002-rules.csv";
  REQUIRE(fs::exists(sample));

  // Fill in the skeleton and feed it back.
  std::string filled;
  std::istringstream lines(slurp(sample));
  std::string line;
  std::getline(lines, line);
  filled = line + "\n";
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    auto id = line.substr(0, line.find(','));
    filled += id + ",alice," + (n++ == 0 ? "EQUIVALENT" : "NONEQUIVALENT") + "\n";
  }
  REQUIRE(n > 0);
  auto labels = tmp.path() / "labels.csv";
  std::ofstream(labels) << filled;
  r = cli(tmp, "metrics --bug " + bug + " --pool " + q(pool) + " --labels " + q(labels));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  auto labeled = json::parse(r.out);
  CHECK(labeled["usability"]["emr_sample"] == n);
  CHECK(labeled["usability"]["emr_estimate"].get<double>() == doctest::Approx(1.0 / static_cast<double>(n)));
}

TEST_CASE("cli: sample skeleton for a large pool") {
  ScratchDir tmp;
  auto pool = tmp.path() / "pool-big.json";
  {
    std::ofstream out(pool);
    out << R"({"format":"mutforge-pool","version":1,"project_id":"big","generator_id":"g","records":[)";
    for (int i = 0; i < 351332; ++i) {
      if (i) out << ',';
      out << R"({"id":"m)" << i
          << R"(","origin":"x","location":{"file":"a.mini","line_start":1,"line_end":1},"original_text":"a","mutated_text":"b"})";
    }
    out << "]}";
  }
  auto csv = tmp.path() / "sample.csv";
  auto r = cli(tmp, "sample --pool " + q(pool) + " --confidence 0.95 --margin 0.05 -o " + q(csv));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(line_count(slurp(csv)) == 384 + 1);
  CHECK(r.out.find("384 rows") != std::string::npos);
}

TEST_CASE("cli: errors") {
  ScratchDir tmp;
  auto bad = tmp.path() / "bad.toml";
  std::ofstream(bad) << "bugs_dir = \"x\"\ncontext_length = 4\n";

  auto r = cli(tmp, "--config " + q(bad) + " experiment");
  CHECK(r.code != 0);
  CHECK(r.err.find("context_length") != std::string::npos);
  CHECK(r.err.find("bad.toml:2:") != std::string::npos);

  r = cli(tmp, "--verbose --config " + q(bad) + " experiment");
  CHECK(r.code != 0);
  auto err = json::parse(r.err);
  CHECK(err["code"] == 4);
  CHECK(err["message"].get<std::string>().find("context_length") != std::string::npos);

  r = cli(tmp, "experiment");
  CHECK(r.code == 2);
  r = cli(tmp, "frobnicate");
  CHECK(r.code == 2);
  r = cli(tmp, "generate --bug " + q(data_dir() / "fixtures" / "bug-001") + " --generator nope");
  CHECK(r.code == 1);
  CHECK(r.err.find("nope") != std::string::npos);
  r = cli(tmp, "--version");
  CHECK(r.code == 0);
}
