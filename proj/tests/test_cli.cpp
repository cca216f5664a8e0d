// Copyright 2026 The stocheuler Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "stocheuler/io.hpp"

using namespace stocheuler;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::absolute("cli_test_runs");

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(STOCHEULER_CLI_PATH) + " " + args + " > " +
                          (kRoot / "stdout.txt").string() + " 2> " + (kRoot / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string dir(const std::string& name) { return (kRoot / name).string(); }

struct Fresh {
  Fresh() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
  }
};

}  // namespace

TEST_CASE_METHOD(Fresh, "sample writes Hermitian snapshots reproducibly") {
  REQUIRE(run("sample --measure white --N 4 --count 100 --seed 7 --out " + dir("s1")) == 0);
  REQUIRE(run("--workers 4 sample --measure white --N 4 --count 100 --seed 7 --out " + dir("s2")) == 0);
  const auto batch = read_sample_batch_csv(kRoot / "s1" / "samples.csv");
  CHECK(batch.size() == 100);
  CHECK(batch.front().lattice().cutoff() == 4);
  CHECK(slurp(kRoot / "s1" / "samples.csv") == slurp(kRoot / "s2" / "samples.csv"));
  CHECK_NOTHROW(verify_manifest_file(kRoot / "s1", "samples.csv"));
  CHECK(load_manifest(kRoot / "s1")["status"] == "complete");

  REQUIRE(run("sample --measure gibbs --beta 2 --N 2 --count 5 --seed 1 --out " + dir("g")) == 0);
  CHECK(read_sample_batch_csv(kRoot / "g" / "samples.csv").size() == 5);
}

TEST_CASE_METHOD(Fresh, "invalid arguments exit with status 2") {
  CHECK(run("sample --measure gibbs --beta -1.5 --N 2 --count 5 --out " + dir("bad")) == 2);
  CHECK(slurp(kRoot / "stderr.txt").find("beta > -1") != std::string::npos);
  CHECK(run("gibbs partition --beta -1.5 --K 2") == 2);
  CHECK(run("evolve --N 2 --ensemble 0 --out " + dir("e0")) == 2);
  CHECK(run("evolve --N 2 --T 1 --save-every 0.3 --out " + dir("e1")) == 2);
  CHECK(run("check --suite nonsense --out " + dir("c0")) == 2);
  CHECK(run("sample --measure pink --N 2 --out " + dir("c1")) == 2);
  CHECK(run("frobnicate") == 2);
}

TEST_CASE_METHOD(Fresh, "utility commands") {
  CHECK(run("lattice info --N 2") == 0);
  CHECK(slurp(kRoot / "stdout.txt").find("24") != std::string::npos);
  CHECK(run("gibbs partition --beta 1 --K 1 --samples 20000 --seed 3") == 0);
  CHECK(slurp(kRoot / "stdout.txt").find("1.84726") != std::string::npos);
}

TEST_CASE_METHOD(Fresh, "check suites from the command line") {
  CHECK(run("check --suite drift --N 3 --trials 100 --out " + dir("drift")) == 0);
  CHECK(fs::exists(kRoot / "drift" / "report.csv"));
  CHECK_NOTHROW(verify_manifest_file(kRoot / "drift", "report.csv"));
  CHECK(run("check --suite conservation --N 4 --T 10 --dt 1e-3 --out " + dir("cons")) == 0);
  const auto report = slurp(kRoot / "cons" / "report.csv");
  CHECK(report.find("enstrophy") != std::string::npos);
  CHECK(report.find("energy") != std::string::npos);
}

TEST_CASE_METHOD(Fresh, "evolve then check stationarity from the run") {
  REQUIRE(run("evolve --N 4 --alpha 0 --beta-init 2 --T 5 --dt 0.01 --save-every 0.5 --ensemble 1000 --seed 4 "
              "--out " + dir("inv")) == 0);
  CHECK(fs::exists(kRoot / "inv" / "trajectories.csv"));
  CHECK(run("check --suite stationarity --from-run " + dir("inv") + " --out " + dir("inv_check")) == 0);

  REQUIRE(run("evolve --N 4 --alpha 1 --beta-init 0 --T 1 --dt 0.01 --save-every 0.5 --ensemble 1000 --seed 5 "
              "--out " + dir("white")) == 0);
  CHECK(run("check --suite stationarity --from-run " + dir("white") + " --out " + dir("white_check")) == 0);

  // Friction drives mu_beta towards white noise, so the low modes drift away.
  REQUIRE(run("evolve --N 4 --alpha 1 --beta-init 2 --T 2 --dt 0.01 --save-every 1 --ensemble 1000 --seed 6 "
              "--out " + dir("drift_away")) == 0);
  CHECK(run("check --suite stationarity --from-run " + dir("drift_away") + " --out " + dir("drift_away_check")) == 4);
  CHECK(slurp(kRoot / "stderr.txt").find("FAIL") != std::string::npos);

  std::ofstream(kRoot / "white" / "summary.csv", std::ios::app) << "9,abs2_1_0,1,1,1\n";
  CHECK(run("check --suite stationarity --from-run " + dir("white") + " --out " + dir("tampered")) == 1);
  CHECK(slurp(kRoot / "stderr.txt").find("digest mismatch") != std::string::npos);
}

TEST_CASE_METHOD(Fresh, "overflow exits with status 3 and flags the manifest") {
  CHECK(run("evolve --N 8 --alpha 0 --scheme em --dt 0.5 --T 50 --save-every 0.5 --ensemble 4 --beta-init -0.9 "
            "--out " + dir("ov")) == 3);
  const auto m = load_manifest(kRoot / "ov");
  CHECK(m["partial"] == true);
  CHECK(m["overflowed_trajectories"].get<int>() > 0);
}

TEST_CASE_METHOD(Fresh, "config file with flag precedence and default output directory") {
  std::ofstream(kRoot / "cfg.toml") << "[check]\nsuite = \"drift\"\nN = 3\ntrials = 50\n";
  REQUIRE(run("--config " + (kRoot / "cfg.toml").string() + " check --trials 20 --out " + dir("cfg")) == 0);
  const auto m = load_manifest(kRoot / "cfg");
  CHECK(m["config"]["N"] == 3);
  CHECK(m["config"]["trials"] == 20);

  REQUIRE(run("check --suite drift --trials 10", "STOCHEULER_OUT_DIR=" + dir("env")) == 0);
  CHECK(fs::exists(kRoot / "env" / "report.csv"));
}
