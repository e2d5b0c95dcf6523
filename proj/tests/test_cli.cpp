#include <gtest/gtest.h>

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "raisdr/aggregation.hpp"

extern char** environ;

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() /
                   ("raisdr-cli-" + std::to_string(::getpid()) + "-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

pid_t spawn(const std::vector<std::string>& args, const fs::path& log) {
  std::vector<char*> argv;
  std::string exe = RAISDR_CLI_PATH;
  argv.push_back(exe.data());
  std::vector<std::string> copy = args;
  for (auto& a : copy) argv.push_back(a.data());
  argv.push_back(nullptr);
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_addopen(&fa, 1, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_adddup2(&fa, 1, 2);
  pid_t pid = -1;
  const int rc = posix_spawn(&pid, exe.c_str(), &fa, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  EXPECT_EQ(rc, 0);
  return pid;
}

int wait_exit(pid_t pid) {
  int status = 0;
  waitpid(pid, &status, 0);
  return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
}

Run run(const std::vector<std::string>& args) {
  static int counter = 0;
  const auto log = fs::temp_directory_path() /
                   ("raisdr-cli-" + std::to_string(::getpid()) + "-" +
                    std::to_string(counter++) + ".log");
  Run r;
  r.code = wait_exit(spawn(args, log));
  r.output = slurp(log);
  fs::remove(log);
  return r;
}

// Waits for the "listening on HOST:PORT" line and returns the port.
int wait_listening(const fs::path& log) {
  for (int i = 0; i < 200; ++i) {
    const auto text = slurp(log);
    const auto at = text.find("listening on ");
    if (at != std::string::npos) {
      const auto colon = text.find(':', at + 13);
      const auto end = text.find('\n', colon);
      if (colon != std::string::npos && end != std::string::npos) {
        return std::stoi(text.substr(colon + 1, end - colon - 1));
      }
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(25));
  }
  return -1;
}

}  // namespace

TEST(Cli, ReproduceDefault) {
  const auto r = run({"reproduce"});
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("98; (91, 96, 64, 99, 96)"), std::string::npos);
  EXPECT_NE(r.output.find("84; (93, 74, 51, 97, 78)"), std::string::npos);
}

TEST(Cli, ReproduceMatrix) {
  const auto r = run({"reproduce", "--matrix", "TP=49,FP=28,FN=5,TN=715"});
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("98; (91, 96, 64, 99, 96)"), std::string::npos);
  EXPECT_EQ(run({"reproduce", "--matrix", "TP=49"}).code, 2);
}

TEST(Cli, ReproducePerturbedFails) {
  const auto r = run({"reproduce", "--perturb", "per-patient/proposed/RDR:TP=40"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("per-patient/proposed/RDR"), std::string::npos);
  EXPECT_NE(r.output.find("Sens"), std::string::npos);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"evaluate"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, SimulateThenEvaluate) {
  const auto dir = scratch("sim");
  auto r = run({"simulate", "--seed", "3", "--flip-rates", "FN=5/54,FP=28/743", "--out",
                (dir / "a").string()});
  ASSERT_EQ(r.code, 0) << r.output;
  r = run({"simulate", "--seed", "3", "--flip-rates", "FN=5/54,FP=28/743", "--out",
           (dir / "b").string()});
  ASSERT_EQ(r.code, 0);
  for (const auto* f : {"cohort.csv", "predictions.csv", "flips.json"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  const auto flips = nlohmann::json::parse(slurp(dir / "a" / "flips.json"));
  EXPECT_EQ(flips["fn"].size(), 5u);

  r = run({"evaluate", "--cohort", (dir / "a" / "cohort.csv").string(), "--predictions",
           (dir / "a" / "predictions.csv").string(), "--scenario", "experiment-1", "--out",
           (dir / "eval").string()});
  ASSERT_EQ(r.code, 0) << r.output;
  // Count FN rows straight from the emitted pairs file.
  const auto pairs = raisdr::parse_pairs_csv(slurp(dir / "eval" / "pairs.csv"));
  int fn = 0;
  for (const auto& p : pairs) {
    fn += p.truth == raisdr::ReferralCategory::Referable &&
          p.prediction == raisdr::ReferralCategory::NonReferable;
  }
  EXPECT_EQ(fn, 5);
  EXPECT_TRUE(fs::exists(dir / "eval" / "report.json"));
  EXPECT_TRUE(fs::exists(dir / "eval" / "roc.csv"));

  r = run({"evaluate", "--cohort", (dir / "a" / "cohort.csv").string(), "--predictions",
           (dir / "a" / "predictions.csv").string(), "--scenario", "experiment-5", "--out",
           (dir / "eval5").string()});
  ASSERT_EQ(r.code, 0) << r.output;
  const auto fairness = slurp(dir / "eval5" / "fairness.csv");
  EXPECT_NE(fairness.find("Projection,Per Image,B,A"), std::string::npos) << fairness;

  r = run({"fairness", "--pairs", (dir / "eval" / "pairs.csv").string(), "--attribute", "sex",
           "--unprivileged", "Male", "--privileged", "Female", "--unit", "patient"});
  EXPECT_EQ(r.code, 0) << r.output;
  fs::remove_all(dir);
}

TEST(Cli, OracleSimulationIsPerfect) {
  const auto dir = scratch("oracle");
  ASSERT_EQ(run({"simulate", "--seed", "1", "--out", dir.string()}).code, 0);
  const auto r = run({"evaluate", "--cohort", (dir / "cohort.csv").string(), "--predictions",
                      (dir / "predictions.csv").string(), "--scenario", "experiment-7",
                      "--out", (dir / "eval").string()});
  ASSERT_EQ(r.code, 0) << r.output;
  const auto report = nlohmann::json::parse(slurp(dir / "eval" / "report.json"));
  EXPECT_EQ(report["metrics"]["accuracy"]["percent"], 100);
  EXPECT_EQ(report["fairness"][0]["eod_1"]["numerator"], 0);
  fs::remove_all(dir);
}

TEST(Cli, MissingPredictionsFile) {
  const auto dir = scratch("missing");
  ASSERT_EQ(run({"simulate", "--seed", "1", "--out", dir.string()}).code, 0);
  const auto r = run({"evaluate", "--cohort", (dir / "cohort.csv").string(), "--predictions",
                      (dir / "nope.csv").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("SchemaError"), std::string::npos) << r.output;
  fs::remove_all(dir);
}

TEST(Cli, InvalidSimulationParams) {
  const auto dir = scratch("params");
  std::ofstream(dir / "p.json") << R"({"n_patients": 10, "female_fraction": 0.5, "age_mean": 60, "age_sd": 10,
        "group_counts": {"R0R1": 1, "R2": 1, "R3": 1, "R4": 1, "ungradable": 1}})";
  const auto r = run({"simulate", "--params", (dir / "p.json").string(), "--out",
                      (dir / "o").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("InvalidParams"), std::string::npos) << r.output;
  fs::remove_all(dir);
}

TEST(Cli, ServeHealthAndShutdown) {
  const auto dir = scratch("serve");
  std::ofstream(dir / "manifest.json") << "[]";
  const auto log = dir / "serve.log";
  const pid_t pid = spawn({"serve", "--port", "0", "--backend",
                           "stub:" + (dir / "manifest.json").string(), "--store",
                           (dir / "store").string()},
                          log);
  const int port = wait_listening(log);
  ASSERT_GT(port, 0) << slurp(log);
  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/v1/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  res = client.Post("/v1/studies", "{}", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);

  // A second server on the same port cannot bind.
  const auto log2 = dir / "serve2.log";
  const pid_t clash = spawn({"serve", "--port", std::to_string(port), "--backend",
                             "stub:" + (dir / "manifest.json").string()},
                            log2);
  EXPECT_EQ(wait_exit(clash), 3);
  EXPECT_NE(slurp(log2).find("BindError"), std::string::npos);

  kill(pid, SIGTERM);
  EXPECT_EQ(wait_exit(pid), 0) << slurp(log);
  EXPECT_NE(slurp(log).find("stopped"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "store" / "snapshot.jsonl"));
  fs::remove_all(dir);
}

TEST(Cli, ServeBadBackend) {
  const auto r = run({"serve", "--port", "0", "--backend", "stub:/nonexistent/manifest.json"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.code, 1);
}
