#pragma once

// Command-line front end: option parsing, the `test` and `simulate`
// commands and their serialized reports.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dirnormal/classical.hpp"
#include "dirnormal/directional.hpp"
#include "dirnormal/simulation.hpp"

namespace dirnormal {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitDegenerate = 2;

enum class OutputFormat { kJson, kCsv };

struct RunConfig {
  std::string command;  // "test" or "simulate"
  std::string case_name = "c1";
  std::vector<std::string> data_paths;
  std::optional<std::string> group_col;
  std::vector<int> blocks;
  std::optional<std::string> mu0_path;
  std::optional<std::string> lambda0_path;
  std::optional<std::string> pattern_path;
  std::vector<std::string> methods{"dt", "lrt", "sko1", "sko2"};
  double interval_width = 5.0;
  double quad_tol = 1e-9;
  int bc_reps = 500;
  std::uint64_t seed = 1;
  std::string out;
  OutputFormat format = OutputFormat::kJson;
  bool pretty = false;

  // simulate
  std::vector<int> n{100};
  int p = 5;
  int k = 3;
  int reps = 1000;
  std::string alternative = "null";
  double delta = 0.0;
  double eta = 0.0;
  double alpha = 0.05;
  unsigned threads = 0;
};

/// Parses argv with CLI11. Returns the config, or an exit code when parsing
/// ended the run (help requested or invalid options).
struct ParseOutcome {
  std::optional<RunConfig> config;
  int exit_code = kExitOk;
};
ParseOutcome parse_command_line(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Everything the `test` command reports for one data set.
struct TestReport {
  std::string case_name;
  std::vector<int> group_sizes;
  int p = 0;
  int d = 0;
  std::vector<std::string> methods;
  std::optional<ClassicalReport> classical;
  std::optional<DirectionalDiagnostics> directional;
  bool degenerate = false;
  std::string note;
};

/// Runs the requested methods on already loaded groups.
TestReport run_test(const HypothesisSpec& spec, const GroupedData& groups, const std::vector<Method>& methods,
                    const DirectionalOptions& dir_options, int bc_reps, std::uint64_t seed,
                    const std::string& case_name);

nlohmann::ordered_json report_to_json(const TestReport& report);
std::string report_to_csv(const TestReport& report);
std::string report_to_pretty(const TestReport& report);

/// summary.csv content: method,metric,value rows.
std::string study_summary_csv(const StudyResult& result);
/// ECDF of a p-value sample: p_value,empirical_cdf rows.
std::string ecdf_csv(std::vector<double> pvalues);

int run_test_command(const RunConfig& config, std::ostream& out, std::ostream& err);
int run_simulate_command(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Entry point used by the executable.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dirnormal
