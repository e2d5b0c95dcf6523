#pragma once

// Subcommands behind the command-line tool. Each returns its exit code.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace raisdr {

enum ExitCode : int {
  kExitOk = 0,
  kExitMismatch = 1,
  kExitInputError = 2,
  kExitEnvironmentError = 3,
};

struct ReproduceOptions {
  /// "TP=49,FP=28,FN=5,TN=715": report this matrix only.
  std::optional<std::string> matrix;
  /// "per-patient/proposed/RDR:TP=50": overwrite one published cell before
  /// comparing (negative control).
  std::optional<std::string> perturb;
  std::optional<std::filesystem::path> out;
};
int cmd_reproduce(const ReproduceOptions& opts, std::ostream& out,
                  std::ostream& err);

struct EvaluateOptions {
  std::filesystem::path cohort;
  std::filesystem::path predictions;
  std::string scenario = "experiment-1";
  std::optional<std::filesystem::path> out;
};
int cmd_evaluate(const EvaluateOptions& opts, std::ostream& out,
                 std::ostream& err);

struct FairnessOptions {
  std::filesystem::path pairs;
  std::string attribute;
  std::string unprivileged;
  std::string privileged;
  std::string unit = "image";
  int age_boundary = 60;
  double di_lower = 0.8;
  double di_upper = 1.25;
  std::optional<std::filesystem::path> out;
};
int cmd_fairness(const FairnessOptions& opts, std::ostream& out,
                 std::ostream& err);

struct SimulateOptions {
  std::optional<std::filesystem::path> params;  // default: validation cohort
  std::uint64_t seed = 0;
  std::string flip_rates;
  std::filesystem::path out;
};
int cmd_simulate(const SimulateOptions& opts, std::ostream& out,
                 std::ostream& err);

struct PreprocessOptions {
  std::filesystem::path input;
  std::filesystem::path output;
};
int cmd_preprocess(const PreprocessOptions& opts, std::ostream& out,
                   std::ostream& err);

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  /// "stub:PATH" or "http:URL".
  std::string backend;
  std::optional<std::filesystem::path> store;
  std::optional<std::string> token;
  /// "MODEL=VALUE", e.g. "M1=0.4".
  std::vector<std::string> thresholds;
  /// "NAME=COHORT_CSV,PREDICTIONS_CSV".
  std::vector<std::string> datasets;
};
/// Blocks until SIGINT or SIGTERM, then compacts the store and returns 0.
/// Prints "listening on HOST:PORT" once accepting.
int cmd_serve(const ServeOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace raisdr
