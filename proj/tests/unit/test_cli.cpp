#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace {

struct RunResult {
  int status = -1;
  std::string out;
};

// Runs the CLI through the shell; stderr is discarded.
RunResult run_cli(const std::string& args) {
  const std::string command = std::string("'") + TEMPMASK_CLI_PATH + "' " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path = std::filesystem::temp_directory_path() / ("tempmask-cli-" + std::to_string(rng()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("cli count") {
  auto r = run_cli("count --l 7 --k0 2 --k1 3");
  CHECK(r.status == 0);
  CHECK(r.out == "9\n");
  r = run_cli("count --l 7 --k0 2 --k1 3 --json");
  CHECK(r.status == 0);
  CHECK(nlohmann::json::parse(r.out).at("count") == "9");
  CHECK(run_cli("count --l 0 --k0 2 --k1 3").status == 1);
  CHECK(run_cli("count --l 7 --k0 2").status == 2);
  CHECK(run_cli("count --l seven --k0 2 --k1 3").status == 2);
  CHECK(run_cli("frobnicate").status == 2);
  CHECK(run_cli("").status == 2);
}

TEST_CASE("every subcommand has --help") {
  for (const char* sub : {"count", "sample", "aggregate", "ate", "simulate", "gen-scene", "annotate"}) {
    CAPTURE(sub);
    const auto r = run_cli(std::string(sub) + " --help");
    CHECK(r.status == 0);
    CHECK(r.out.find("--json") != std::string::npos);
  }
  CHECK(run_cli("--help").status == 0);
}

TEST_CASE("cli sample") {
  TempDir dir;
  auto r = run_cli("sample --l 7 --k0 2 --k1 3 --q 5 --seed 1");
  CHECK(r.status == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 5);
  CHECK(r.out == run_cli("sample --l 7 --k0 2 --k1 3 --q 5 --seed 1").out);
  r = run_cli("sample --l 7 --k0 2 --k1 3 --q 3 --seed 1 --classes a,b --json --out-dir '" +
              dir.path.string() + "'");
  CHECK(r.status == 0);
  CHECK(std::filesystem::exists(dir.path / "mask_0002.csv"));
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("masks").size() == 3);
}

TEST_CASE("cli ate") {
  TempDir dir;
  std::ofstream(dir / "a.txt") << "0 0 0 0 0 0 0 1\n1 1 0 0 0 0 0 1\n2 2 1 0 0 0 0 1\n";
  std::ofstream(dir / "b.txt") << "0 0 0 0 0 0 0 1\n1 0 0 0 0 0 0 1\n";
  auto r = run_cli("ate --ref " + dir / "a.txt" + " --est " + dir / "a.txt");
  CHECK(r.status == 0);
  CHECK(r.out == "0.000000\n");
  r = run_cli("ate --align none --ref " + dir / "a.txt" + " --est " + dir / "b.txt" + " --json");
  CHECK(r.status == 0);
  CHECK(nlohmann::json::parse(r.out).at("ate_rmse").get<double>() == doctest::Approx(std::sqrt(0.5)));
  CHECK(run_cli("ate --ref " + dir / "missing.txt" + " --est " + dir / "a.txt").status == 1);
  CHECK(run_cli("ate --align affine --ref " + dir / "a.txt" + " --est " + dir / "a.txt").status != 0);
}

TEST_CASE("cli scene, simulate and aggregate") {
  TempDir dir;
  auto r = run_cli("gen-scene --profile mixed --length 30 --seed 3 --out " + dir / "s.json" +
                   " --optimal-out " + dir / "opt.csv");
  CHECK(r.status == 0);
  CHECK(std::filesystem::exists(dir / "opt.csv"));
  CHECK(run_cli("gen-scene --profile mixed --length 5").status == 1);

  r = run_cli("simulate --scene " + dir / "s.json" + " --mask " + dir / "opt.csv" + " --out " +
              dir / "r.json");
  CHECK(r.status == 0);
  const auto result = nlohmann::json::parse(std::ifstream(dir / "r.json"));
  CHECK(result.contains("ate_rmse"));
  CHECK(result.contains("tracking_rate"));

  std::ofstream(dir / "m1.csv") << "frame,object\n0,0\n1,0\n2,1\n3,1\n4,1\n5,0\n6,0\n";
  std::ofstream(dir / "m2.csv") << "frame,object\n0,0\n1,0\n2,0\n3,0\n4,0\n5,0\n6,0\n";
  r = run_cli("aggregate --sample " + dir / "m1.csv" + ":0.9 --sample " + dir / "m2.csv" +
              ":0.5 --threshold 0.5 --json");
  CHECK(r.status == 0);
  CHECK(nlohmann::json::parse(r.out).at("mask").at("object") == "0011100");
  CHECK(run_cli("aggregate --sample " + dir / "m1.csv" + ":0.9").status == 1);
}
