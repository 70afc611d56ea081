#pragma once

// Likelihood ratio statistic, Skovgaard's modified statistics and the
// parametric-bootstrap Bartlett correction.

#include <cstdint>
#include <optional>

#include "dirnormal/hypotheses.hpp"

namespace dirnormal {

/// Statistics at or below this value are treated as an exact-null fit.
inline constexpr double kDegenerateW = 1e-10;

/// P(chi2_d > x). Returns 1 for x <= 0.
double chisq_upper_tail(double x, int d);

/// 2{l(phi_hat) - l(phi_hat_psi)} from the closed forms of each case.
double lrt_mle(const ConstrainedFit& fit);

/// Headline statistic: lrt_mle for every case except kEqualCovariances,
/// which uses the modified (n_i - 1, n - k) estimators.
double lrt(const ConstrainedFit& fit);

/// The three ingredients of the correction factor, all in logs so that
/// large d never overflows.
struct GammaParts {
  double q1 = 0.0;          // (phi_hat - phi_hat_psi)^T (s - s_psi)
  double q2 = 0.0;          // (s - s_psi)^T J(phi_hat_psi)^{-1} (s - s_psi)
  double log_det_ratio = 0.0;  // (1/2) log{|J(phi_hat_psi)| / |J(phi_hat)|}
};

GammaParts skovgaard_parts(const ConstrainedFit& fit);

/// log gamma with W the likelihood ratio statistic of the plain MLEs.
/// Throws DegenerateNull when W <= kDegenerateW.
double skovgaard_log_gamma(const ConstrainedFit& fit);
double skovgaard_gamma(const ConstrainedFit& fit);

struct SkovgaardStats {
  double w_star = 0.0;
  double w_star2 = 0.0;
  double p_star = 1.0;
  double p_star2 = 1.0;
};

SkovgaardStats skovgaard_stats_log(double w, double log_gamma, int d);
SkovgaardStats skovgaard_stats(double w, double gamma, int d);

struct BartlettResult {
  double e_w_hat = 0.0;
  double w_bc = 0.0;
  double p_bc = 1.0;
};

/// Mean of the headline statistic over b_reps datasets drawn from the fitted
/// null with the group sizes of the fit.
double bootstrap_expected_w(const HypothesisSpec& spec, const ConstrainedFit& fit, int b_reps,
                            std::uint64_t seed);

BartlettResult bartlett_from_expectation(double w, double e_w_hat, int d);
BartlettResult bartlett_bootstrap(const HypothesisSpec& spec, const ConstrainedFit& fit, int b_reps,
                                  std::uint64_t seed);

struct ClassicalReport {
  int d = 0;
  double w = 0.0;      // headline statistic
  double w_mle = 0.0;  // statistic of the plain MLEs, equal to w except for case 4
  bool degenerate = false;
  std::optional<double> gamma;
  std::optional<double> log_gamma;
  double w_star = 0.0;
  double w_star2 = 0.0;
  double p_lrt = 1.0;
  double p_star = 1.0;
  double p_star2 = 1.0;
  std::optional<BartlettResult> bartlett;
};

struct ClassicalOptions {
  bool skovgaard = true;
  std::optional<int> bootstrap_reps;  // run the Bartlett bootstrap when set
  std::optional<double> e_w_hat;      // shared calibrated expectation, skips the bootstrap
  std::uint64_t seed = 0;
};

ClassicalReport classical_tests(const HypothesisSpec& spec, const ConstrainedFit& fit,
                                const ClassicalOptions& options = {});

}  // namespace dirnormal
