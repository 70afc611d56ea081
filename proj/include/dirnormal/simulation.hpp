#pragma once

// Monte Carlo harness: scenario generators for the six hypotheses, a worker
// pool over replications and the size / power summaries built from them.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dirnormal/directional.hpp"
#include "dirnormal/hypotheses.hpp"

namespace dirnormal {

enum class Method { kDT = 0, kLRT, kBC, kSko1, kSko2 };
inline constexpr int kMethodCount = 5;
inline constexpr std::array<Method, kMethodCount> kAllMethods{Method::kDT, Method::kLRT, Method::kBC,
                                                             Method::kSko1, Method::kSko2};

std::string_view method_name(Method m);  // "dt", "lrt", "bc", "sko1", "sko2"
std::optional<Method> parse_method(std::string_view name);

enum class Alternative { kNull, kSetting1, kLocal, kExtreme };

std::string_view alternative_name(Alternative a);
std::optional<Alternative> parse_alternative(std::string_view name);

struct ScenarioSpec {
  Case kind = Case::kProportionalIdentity;
  std::vector<int> n{100};  // one size per group; a single entry is reused for every group
  int p = 5;
  int k = 3;                // groups, equality cases only
  Alternative alternative = Alternative::kNull;
  double delta = 0.0;
  double eta = 0.0;
  int reps = 1000;
  std::uint64_t seed = 1;
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  int bootstrap_reps = 500;
  double alpha = 0.05;
  unsigned threads = 0;     // 0: DIRNORMAL_THREADS or the machine parallelism
  DirectionalOptions directional;

  int groups() const;
  int group_size(int i) const;
  bool wants(Method m) const;
};

/// Hypothesis tested in a scenario (case 2 splits p in ratio 2:2:1, case 5
/// tests mu0 = 0, Lambda0 = I).
HypothesisSpec scenario_hypothesis(const ScenarioSpec& spec);

/// Block sizes of the case 2 design.
std::vector<int> case2_blocks(int p);

/// Per-group mean and covariance of the data-generating distribution.
struct GroupModel {
  Vector mean;
  SpdMatrix cov;
};

/// Throws InvalidScenario when a parameter is out of range or the printed
/// construction is not positive definite.
std::vector<GroupModel> scenario_model(const ScenarioSpec& spec, Alternative alternative);
void validate_scenario(const ScenarioSpec& spec);

enum class Phase : std::uint64_t { kNull = 0, kAlternative = 1, kCalibration = 2 };

GroupedData generate_scenario(const ScenarioSpec& spec, int rep_index, Phase phase = Phase::kNull);

/// Order statistic at index ceil(alpha R) of the sorted p-values.
double corrected_cutoff(std::vector<double> null_pvalues, double alpha);

/// Rejection rate of `pvalues` at a cutoff calibrated on `null_pvalues`.
/// p-values below the cutoff reject; ties at the cutoff reject only when the
/// null sample has no more than ceil(alpha R) values at or below it.
double corrected_rate(const std::vector<double>& pvalues, const std::vector<double>& null_pvalues,
                      double alpha);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against U(0, 1).
KsResult ks_uniformity(std::vector<double> pvalues);

/// Asymptotic upper tail of the Kolmogorov distribution.
double kolmogorov_upper_tail(double lambda);

/// p-values of one replication, NaN for methods not requested.
struct RepRecord {
  std::array<double, kMethodCount> pvalues;
  bool failed = false;
  std::string error;
};

RepRecord run_replication(const ScenarioSpec& spec, const HypothesisSpec& hyp, const GroupedData& data,
                          std::optional<double> e_w_hat);

struct MethodSummary {
  Method method;
  std::vector<double> null_pvalues;  // successful replications, in rep order
  std::vector<double> alt_pvalues;
  double estimated_type1 = 0.0;
  double corrected_cutoff = 0.0;
  double corrected_type1 = 0.0;
  std::optional<double> power;
  std::optional<double> corrected_power;
  KsResult ks;
};

struct StudyResult {
  ScenarioSpec spec;
  int d = 0;
  std::vector<MethodSummary> methods;
  std::optional<double> e_w_hat;  // calibrated expectation used by BC
  int null_failures = 0;
  int alt_failures = 0;
  std::vector<std::string> failure_messages;
  double wall_seconds = 0.0;

  const MethodSummary& summary(Method m) const;
};

/// Worker count: explicit request, else DIRNORMAL_THREADS, else hardware.
unsigned worker_count(unsigned requested);

/// Records of reps replications generated in `phase`, independent of the
/// schedule. `first_rep` offsets the replication index.
std::vector<RepRecord> run_replications(const ScenarioSpec& spec, Phase phase, int reps,
                                        std::optional<double> e_w_hat, int first_rep = 0);

/// Mean headline W over spec.bootstrap_reps calibration datasets from the null.
double calibrate_expected_w(const ScenarioSpec& spec);

StudyResult run_study(const ScenarioSpec& spec);

}  // namespace dirnormal
