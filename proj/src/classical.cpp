#include "dirnormal/classical.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <string>

#include "dirnormal/errors.hpp"

namespace dirnormal {

double chisq_upper_tail(double x, int d) {
  if (d < 1) throw DimensionError("chi-square degrees of freedom must be positive");
  if (!(x > 0.0)) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * d, 0.5 * x);
}

namespace {

double sum_log_eigs(const ConstrainedFit& fit, int group) {
  return fit.pencil_eigs[group].array().log().sum();
}

}  // namespace

double lrt_mle(const ConstrainedFit& fit) {
  const int p = fit.p;
  switch (fit.kind) {
    case Case::kSpecifiedMeanCov: {
      const auto& g = fit.groups.front();
      const double n = g.n;
      return -n * fit.group_cov.front().log_det() + n * g.second_moment.trace() - n * p;
    }
    case Case::kEqualDistributions: {
      double w = fit.n_total * fit.lambda0_inv.log_det();
      for (int i = 0; i < fit.k(); ++i) w -= fit.groups[i].n * fit.group_cov[i].log_det();
      return w;
    }
    default: {
      // -sum_i n_i log|Lambda_i^{-1} Lambda_0| through the pencil eigenvalues.
      double w = 0.0;
      for (int i = 0; i < fit.k(); ++i) w -= fit.groups[i].n * sum_log_eigs(fit, i);
      return w;
    }
  }
}

double lrt(const ConstrainedFit& fit) {
  if (fit.kind != Case::kEqualCovariances) return lrt_mle(fit);
  const int p = fit.p;
  const double n = fit.n_total;
  const double k = fit.k();
  const double log_pooled = fit.lambda0_inv.log_det() + p * std::log(n / (n - k));
  double w = 0.0;
  for (int i = 0; i < fit.k(); ++i) {
    const double ni = fit.groups[i].n;
    const double log_group = fit.group_cov[i].log_det() + p * std::log(ni / (ni - 1.0));
    w += (ni - 1.0) * (log_pooled - log_group);
  }
  return w;
}

GammaParts skovgaard_parts(const ConstrainedFit& fit) {
  const int p = fit.p;
  GammaParts parts;
  switch (fit.kind) {
    case Case::kSpecifiedMeanCov: {
      const auto& g = fit.groups.front();
      const double n = g.n;
      const Matrix conc = fit.group_cov.front().inverse();
      const Matrix dev = Matrix::Identity(p, p) - g.second_moment;
      parts.q2 = n * g.ybar.squaredNorm() + 0.5 * n * dev.squaredNorm();
      parts.q1 = 0.5 * n *
                 (g.ybar.dot(conc * g.ybar) + conc.trace() + g.second_moment.trace() - 2.0 * p);
      parts.log_det_ratio = -0.5 * (p + 2.0) * fit.group_cov.front().log_det();
      break;
    }
    case Case::kEqualDistributions: {
      const Matrix conc0 = fit.lambda0_inv.inverse();
      const Vector& ybar = fit.pooled_mean;
      const Vector l0y = conc0 * ybar;
      const double yly = ybar.dot(l0y);
      double ratio = fit.k() * fit.lambda0_inv.log_det();
      for (int i = 0; i < fit.k(); ++i) {
        const auto& g = fit.groups[i];
        const double ni = g.n;
        const Matrix conc = fit.group_cov[i].inverse();
        const Vector b = g.ybar - ybar;
        const Matrix m = fit.lambda0_inv.matrix() - g.second_moment + ybar * ybar.transpose();
        const Matrix ml = m * conc0;
        const Vector l0b = conc0 * b;
        parts.q1 += ni * (conc * g.ybar - l0y).dot(b) + 0.5 * ni * ((conc - conc0) * m).trace();
        parts.q2 += ni * (1.0 + yly) * b.dot(l0b) + ni * std::pow(l0b.dot(ybar), 2) +
                    2.0 * ni * l0b.dot(m * l0y) + 0.5 * ni * (ml * ml).trace();
        ratio -= fit.group_cov[i].log_det();
      }
      parts.log_det_ratio = 0.5 * (p + 2.0) * ratio;
      break;
    }
    default: {
      double sum_log = 0.0;
      for (int i = 0; i < fit.k(); ++i) {
        const double ni = fit.groups[i].n;
        const auto& nu = fit.pencil_eigs[i].array();
        parts.q2 += 0.5 * ni * (nu - 1.0).square().sum();
        parts.q1 += 0.5 * ni * (nu.inverse() - 1.0).sum();
        sum_log += nu.log().sum();
      }
      parts.log_det_ratio = -0.5 * (p + 2.0) * sum_log;
      break;
    }
  }
  return parts;
}

double skovgaard_log_gamma(const ConstrainedFit& fit) {
  const double w = lrt_mle(fit);
  if (!(w > kDegenerateW)) {
    throw DegenerateNull("likelihood ratio statistic is zero; the correction factor is undefined");
  }
  const GammaParts parts = skovgaard_parts(fit);
  if (!(parts.q1 > 0.0) || !(parts.q2 > 0.0)) {
    throw DegenerateNull("correction factor quantities are not positive");
  }
  const double half_d = 0.5 * fit.d;
  return half_d * std::log(parts.q2) - (half_d - 1.0) * std::log(w) - std::log(parts.q1) +
         parts.log_det_ratio;
}

double skovgaard_gamma(const ConstrainedFit& fit) { return std::exp(skovgaard_log_gamma(fit)); }

SkovgaardStats skovgaard_stats_log(double w, double log_gamma, int d) {
  SkovgaardStats s;
  const double r = 1.0 - log_gamma / w;
  s.w_star = w * r * r;
  s.w_star2 = w - 2.0 * log_gamma;
  s.p_star = chisq_upper_tail(s.w_star, d);
  s.p_star2 = chisq_upper_tail(s.w_star2, d);
  return s;
}

SkovgaardStats skovgaard_stats(double w, double gamma, int d) {
  if (!(gamma > 0.0)) throw DegenerateNull("correction factor must be positive");
  return skovgaard_stats_log(w, std::log(gamma), d);
}

double bootstrap_expected_w(const HypothesisSpec& spec, const ConstrainedFit& fit, int b_reps,
                            std::uint64_t seed) {
  if (b_reps < 50) throw InvalidScenario("bootstrap needs at least 50 replications");
  const int p = fit.p;
  // Standardized data have the null N(0, I) exactly.
  HypothesisSpec sim_spec = spec;
  if (fit.standardized) sim_spec = HypothesisSpec::specified(Vector::Zero(p), SpdMatrix::identity(p));
  const SpdMatrix& cov = fit.lambda0_inv;

  double total = 0.0;
  for (int b = 0; b < b_reps; ++b) {
    Engine rng = make_engine(StreamKey{seed, 0xB0075u + static_cast<std::uint64_t>(fit.kind),
                                       static_cast<std::uint64_t>(b), 3});
    std::vector<SampleSummary> sims;
    for (int i = 0; i < fit.k(); ++i) {
      sims.push_back(summarize(sample_mvn(fit.mu0[i], cov, fit.groups[i].n, rng)));
    }
    total += lrt(constrained_mle(sim_spec, sims));
  }
  const double mean = total / b_reps;
  if (!(mean > 0.0)) throw DegenerateNull("bootstrap mean of W is not positive");
  return mean;
}

BartlettResult bartlett_from_expectation(double w, double e_w_hat, int d) {
  if (!(e_w_hat > 0.0)) throw DegenerateNull("expected W must be positive");
  BartlettResult r;
  r.e_w_hat = e_w_hat;
  r.w_bc = d * w / e_w_hat;
  r.p_bc = chisq_upper_tail(r.w_bc, d);
  return r;
}

BartlettResult bartlett_bootstrap(const HypothesisSpec& spec, const ConstrainedFit& fit, int b_reps,
                                  std::uint64_t seed) {
  return bartlett_from_expectation(lrt(fit), bootstrap_expected_w(spec, fit, b_reps, seed), fit.d);
}

ClassicalReport classical_tests(const HypothesisSpec& spec, const ConstrainedFit& fit,
                                const ClassicalOptions& options) {
  ClassicalReport r;
  r.d = fit.d;
  r.w = lrt(fit);
  r.w_mle = fit.kind == Case::kEqualCovariances ? lrt_mle(fit) : r.w;
  r.degenerate = !(r.w_mle > kDegenerateW);
  if (r.degenerate) {
    r.w_star = r.w_star2 = r.w;
    if (options.bootstrap_reps || options.e_w_hat) r.bartlett = BartlettResult{options.e_w_hat.value_or(0.0), r.w, 1.0};
    return r;
  }
  r.p_lrt = chisq_upper_tail(r.w, fit.d);
  if (options.skovgaard) {
    r.log_gamma = skovgaard_log_gamma(fit);
    r.gamma = std::exp(*r.log_gamma);
    const SkovgaardStats s = skovgaard_stats_log(r.w_mle, *r.log_gamma, fit.d);
    r.w_star = s.w_star;
    r.w_star2 = s.w_star2;
    r.p_star = s.p_star;
    r.p_star2 = s.p_star2;
  }
  if (options.e_w_hat) {
    r.bartlett = bartlett_from_expectation(r.w, *options.e_w_hat, fit.d);
  } else if (options.bootstrap_reps) {
    r.bartlett = bartlett_bootstrap(spec, fit, *options.bootstrap_reps, options.seed);
  }
  return r;
}

}  // namespace dirnormal
