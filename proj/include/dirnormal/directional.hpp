#pragma once

// Directional p-value: the radial integral of the saddlepoint density along
// the line s(t) = (1 - t) s_psi, normalized over the admissible range of t.

#include <functional>
#include <limits>
#include <optional>

#include "dirnormal/hypotheses.hpp"

namespace dirnormal {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// How the log-determinant of the tilted covariance is evaluated per t.
enum class PathEvaluation {
  kSpectral,  // one-time eigendecomposition, O(p) per t
  kCholesky,  // factorize Lambda_i^{-1}(t) at every t
};

enum class Quadrature {
  kAdaptive,   // Gauss-Kronrod 7/15 with interval bisection
  kTrapezoid,  // fixed nodes, for reproducibility checks
};

struct DirectionalOptions {
  double width_sigmas = 5.0;
  double min_drop = 40.0;       // endpoint drop of log g below its maximum
  double infinite_drop = 60.0;  // truncation of an unbounded range
  double rel_tol = 1e-9;
  double abs_tol = 1e-14;
  bool narrow = true;           // false integrates over the whole admissible range
  Quadrature quadrature = Quadrature::kAdaptive;
  int trapezoid_nodes = 200001;
  PathEvaluation path = PathEvaluation::kSpectral;
};

/// Log integrand together with its second derivative and the right end of
/// its domain, with t-free constants already chosen by the builder.
struct GbarFunction {
  std::function<double(double)> value;      // -inf outside (0, t_sup)
  std::function<double(double)> curvature;
  double t_sup = kInfinity;
};

/// Largest t for which every tilted covariance stays positive definite.
/// Throws DegenerateNull when s_psi vanishes.
double t_sup(const ConstrainedFit& fit);

GbarFunction make_gbar(const ConstrainedFit& fit, PathEvaluation path = PathEvaluation::kSpectral);

/// (d - 1) log t + sum_i ((n_i - p - 2) / 2) log|Lambda_i^{-1}(t)| plus the
/// linear mean term of the specified-mean case.
double log_gbar(const ConstrainedFit& fit, double t, PathEvaluation path = PathEvaluation::kSpectral);

/// Closed-form second derivative of log_gbar.
double curvature(const ConstrainedFit& fit, double t);

/// argmax of a concave (hence unimodal) function on [0, hi]. A bracket grown
/// from t = 1 is cross-checked against a search over the whole range; a grid
/// scan settles any disagreement.
double maximize_gbar(const std::function<double(double)>& f, double hi);

struct IntegrationInterval {
  double t_min = 0.0;
  double t_max = 0.0;
  bool full_range = false;
};

/// t_hat -/+ c (-curvature)^{-1/2}, clipped to [0, t_sup]. With f supplied
/// the interval is then widened until both ends sit min_drop below f(t_hat),
/// and it always contains t = 1.
IntegrationInterval integration_interval(double t_hat, double curv, double t_sup,
                                         const std::function<double(double)>& f = {},
                                         const DirectionalOptions& options = {});

struct DirectionalDiagnostics {
  double t_sup = kInfinity;
  double t_upper = kInfinity;  // upper limit actually used
  double t_hat = 0.0;
  double curvature_at_t_hat = 0.0;
  double t_min = 0.0;
  double t_max = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;
  double p_value = 1.0;
  bool full_range = false;
  bool degenerate = false;
};

DirectionalDiagnostics directional_pvalue(const GbarFunction& g, const DirectionalOptions& options = {});

/// Degenerate fits (W = 0) yield p = 1 with the flag set.
DirectionalDiagnostics directional_pvalue(const ConstrainedFit& fit, const DirectionalOptions& options = {});

/// Integral of exp(f(t) - shift) over [a, b].
double integrate_log(const std::function<double(double)>& f, double shift, double a, double b,
                     const DirectionalOptions& options);

}  // namespace dirnormal
