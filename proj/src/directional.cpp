#include "dirnormal/directional.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dirnormal/classical.hpp"
#include "dirnormal/errors.hpp"

namespace dirnormal {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool positive_definite_path(const ConstrainedFit& fit, double t) {
  for (int i = 0; i < fit.k(); ++i) {
    if (!is_positive_definite(path_cov(fit, i, t))) return false;
  }
  return true;
}

double saddle_weight(const ConstrainedFit& fit, int group) {
  return 0.5 * (fit.groups[group].n - fit.p - 2.0);
}

// Coefficient of t in the exponent of the specified-mean case.
double linear_term(const ConstrainedFit& fit) {
  if (fit.kind != Case::kSpecifiedMeanCov) return 0.0;
  const auto& g = fit.groups.front();
  return 0.5 * g.n * (fit.p - g.second_moment.trace());
}

// Eigenvalue form for the linear paths:
// log|Lambda_i^{-1}(t)| = log|Lambda_0^{-1}| + sum_l log(1 - t + t nu_l).
struct LinearPath {
  struct Group {
    double weight;
    double log_det0;
    Eigen::ArrayXd nu;
  };
  std::vector<Group> groups;
  double d;
  double t_sup;

  double value(double t) const {
    if (t < 0.0 || t >= t_sup || std::isnan(t)) return kNegInf;
    double v = 0.0;
    if (d > 1.0) {
      if (t == 0.0) return kNegInf;
      v += (d - 1.0) * std::log(t);
    }
    for (const auto& g : groups) {
      if (g.weight == 0.0) continue;
      const Eigen::ArrayXd lin = 1.0 - t + t * g.nu;
      if ((lin <= 0.0).any()) return kNegInf;
      v += g.weight * (g.log_det0 + lin.log().sum());
    }
    return v;
  }

  double curvature(double t) const {
    double c = d > 1.0 ? -(d - 1.0) / (t * t) : 0.0;
    for (const auto& g : groups) {
      const Eigen::ArrayXd lin = 1.0 - t + t * g.nu;
      c -= g.weight * ((1.0 - g.nu).square() / lin.square()).sum();
    }
    return c;
  }
};

// Quadratic paths (1 - t) A + t C + t(1 - t) b b^T. With A = L L^T and
// L^{-1} C L^{-T} = Q diag(lambda) Q^T the determinant reduces to
// |A| prod_l D_l(t) {1 + t(1 - t) sum_l w_l^2 / D_l(t)}, D_l = 1 - t + t lambda_l,
// w = Q^T L^{-1} b.
struct QuadraticPath {
  struct Group {
    double weight;
    double log_det0;
    Eigen::ArrayXd lambda;
    Eigen::ArrayXd w2;
  };
  std::vector<Group> groups;
  double d;
  double lin;
  double t_sup;

  double value(double t) const {
    if (t < 0.0 || t >= t_sup || std::isnan(t)) return kNegInf;
    double v = lin * t;
    if (d > 1.0) {
      if (t == 0.0) return kNegInf;
      v += (d - 1.0) * std::log(t);
    }
    for (const auto& g : groups) {
      if (g.weight == 0.0) continue;
      const Eigen::ArrayXd dl = 1.0 - t + t * g.lambda;
      if ((dl <= 0.0).any()) return kNegInf;
      const double r = 1.0 + t * (1.0 - t) * (g.w2 / dl).sum();
      if (!(r > 0.0)) return kNegInf;
      v += g.weight * (g.log_det0 + dl.log().sum() + std::log(r));
    }
    return v;
  }
};

struct CholeskyPath {
  const ConstrainedFit* fit;
  double d;
  double lin;
  double t_sup;

  double value(double t) const {
    if (t < 0.0 || t >= t_sup || std::isnan(t)) return kNegInf;
    double v = lin * t;
    if (d > 1.0) {
      if (t == 0.0) return kNegInf;
      v += (d - 1.0) * std::log(t);
    }
    for (int i = 0; i < fit->k(); ++i) {
      const double weight = saddle_weight(*fit, i);
      if (weight == 0.0) continue;
      const auto llt = try_cholesky(path_cov(*fit, i, t));
      if (!llt) return kNegInf;
      v += weight * 2.0 * llt->matrixLLT().diagonal().array().log().sum();
    }
    return v;
  }
};

double trace_curvature(const ConstrainedFit& fit, double t) {
  double c = fit.d > 1 ? -(fit.d - 1.0) / (t * t) : 0.0;
  for (int i = 0; i < fit.k(); ++i) {
    const Matrix& a = fit.lambda0_inv.matrix();
    const Matrix& cov = fit.group_cov[i].matrix();
    const Vector b = fit.groups[i].ybar - fit.mu0[i];
    const Matrix m = path_cov(fit, i, t);
    Matrix dm = cov - a;
    if (!has_linear_path(fit.kind)) dm += (1.0 - 2.0 * t) * b * b.transpose();
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) return kNegInf;
    const Matrix x = llt.solve(dm);
    double second = -(x * x).trace();
    if (!has_linear_path(fit.kind)) second -= 2.0 * b.dot(llt.solve(b));
    c += saddle_weight(fit, i) * second;
  }
  return c;
}

double t_sup_quadratic(const ConstrainedFit& fit) {
  double lo = 1.0;
  double hi = 2.0;
  while (positive_definite_path(fit, hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e8) return kInfinity;
  }
  while (hi - lo > 1e-10 * hi) {
    const double mid = 0.5 * (lo + hi);
    (positive_definite_path(fit, mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

void require_nondegenerate(const ConstrainedFit& fit) {
  if (!(lrt_mle(fit) > kDegenerateW)) {
    throw DegenerateNull("observed statistic coincides with its null expectation");
  }
}

}  // namespace

double t_sup(const ConstrainedFit& fit) {
  require_nondegenerate(fit);
  if (!has_linear_path(fit.kind)) return t_sup_quadratic(fit);
  double nu_min = kInfinity;
  for (const auto& nu : fit.pencil_eigs) nu_min = std::min(nu_min, nu.minCoeff());
  return nu_min >= 1.0 ? kInfinity : 1.0 / (1.0 - nu_min);
}

GbarFunction make_gbar(const ConstrainedFit& fit, PathEvaluation path) {
  GbarFunction g;
  g.t_sup = t_sup(fit);
  const double d = fit.d;
  auto fit_copy = std::make_shared<const ConstrainedFit>(fit);
  g.curvature = [fit_copy](double t) { return curvature(*fit_copy, t); };

  if (path == PathEvaluation::kCholesky) {
    CholeskyPath cp{fit_copy.get(), d, linear_term(fit), g.t_sup};
    g.value = [cp, fit_copy](double t) { return cp.value(t); };
    return g;
  }
  if (has_linear_path(fit.kind)) {
    auto lp = std::make_shared<LinearPath>();
    lp->d = d;
    lp->t_sup = g.t_sup;
    const double log_det0 = fit.lambda0_inv.log_det();
    for (int i = 0; i < fit.k(); ++i) {
      lp->groups.push_back({saddle_weight(fit, i), log_det0, fit.pencil_eigs[i].array()});
    }
    g.value = [lp](double t) { return lp->value(t); };
    g.curvature = [lp](double t) { return lp->curvature(t); };
    return g;
  }
  auto qp = std::make_shared<QuadraticPath>();
  qp->d = d;
  qp->lin = linear_term(fit);
  qp->t_sup = g.t_sup;
  const auto l = fit.lambda0_inv.llt().matrixL();
  const double log_det0 = fit.lambda0_inv.log_det();
  for (int i = 0; i < fit.k(); ++i) {
    Matrix tmp = l.solve(fit.group_cov[i].matrix());
    Matrix sym = l.solve(tmp.transpose());
    sym = 0.5 * (sym + sym.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    if (es.info() != Eigen::Success) throw NoConvergence("eigen solver failed on the tilted path");
    const Vector b = fit.groups[i].ybar - fit.mu0[i];
    const Vector w = es.eigenvectors().transpose() * l.solve(b);
    qp->groups.push_back({saddle_weight(fit, i), log_det0, es.eigenvalues().array(), w.array().square()});
  }
  g.value = [qp](double t) { return qp->value(t); };
  return g;
}

double log_gbar(const ConstrainedFit& fit, double t, PathEvaluation path) {
  const double v = make_gbar(fit, path).value(t);
  if (!std::isfinite(v) && !(t == 0.0 && fit.d == 1)) {
    throw NotPositiveDefinite("t = " + std::to_string(t) + " lies outside (0, t_sup)");
  }
  return v;
}

double curvature(const ConstrainedFit& fit, double t) {
  if (has_linear_path(fit.kind)) {
    double c = fit.d > 1 ? -(fit.d - 1.0) / (t * t) : 0.0;
    for (int i = 0; i < fit.k(); ++i) {
      const Eigen::ArrayXd& nu = fit.pencil_eigs[i].array();
      c -= saddle_weight(fit, i) * ((1.0 - nu).square() / (1.0 - t + t * nu).square()).sum();
    }
    return c;
  }
  return trace_curvature(fit, t);
}

namespace {

double brent_max(const std::function<double(double)>& f, double a, double b, double cap) {
  auto neg = [&](double t) {
    const double v = -f(t);
    return std::isfinite(v) ? std::min(v, cap) : cap;
  };
  std::uintmax_t iters = 500;
  const auto r = boost::math::tools::brent_find_minima(neg, a, b, 40, iters);
  return r.first;
}

}  // namespace

double maximize_gbar(const std::function<double(double)>& f, double hi) {
  if (!(hi > 0.0) || !std::isfinite(hi)) throw NoConvergence("maximization needs a finite positive range");
  const double start = std::min(1.0, 0.5 * hi);
  const double f_start = f(start);
  if (!std::isfinite(f_start)) throw NoConvergence("log integrand is not finite at the start point");
  const double cap = -f_start + 1e4;

  // Route 1: bracket grown from the start point.
  double h = 1e-3 * start;
  double x = start, fx = f_start;
  double up = std::min(x + h, 0.5 * (x + hi));
  double down = std::max(x - h, 0.5 * x);
  double lo_b = down, hi_b = up;
  const double f_up = f(up), f_down = f(down);
  if (f_up > fx || f_down > fx) {
    const int dir = f_up >= f_down ? 1 : -1;
    double prev = dir > 0 ? down : up;
    double step = h;
    for (int it = 0; it < 400; ++it) {
      double next = x + dir * step;
      if (dir > 0 && next >= hi) next = 0.5 * (x + hi);
      if (dir < 0 && next <= 0.0) next = 0.5 * x;
      step *= 2.0;
      const double fn = f(next);
      if (!(fn > fx)) {
        lo_b = std::min(prev, next);
        hi_b = std::max(prev, next);
        break;
      }
      prev = x;
      x = next;
      fx = fn;
      lo_b = dir > 0 ? prev : 0.0;
      hi_b = dir > 0 ? hi : prev;
    }
  }
  const double t_bracket = brent_max(f, lo_b, hi_b, cap);

  // Route 2: the whole range.
  const double t_global = brent_max(f, 0.0, hi, cap);
  const double fb = f(t_bracket), fg = f(t_global);
  const double scale = std::max(1.0, std::abs(t_bracket));
  if (std::abs(t_bracket - t_global) <= 1e-6 * scale ||
      std::abs(fb - fg) <= 1e-10 * (1.0 + std::abs(fb))) {
    return fb >= fg ? t_bracket : t_global;
  }

  // Disagreement: grid scan, then polish around the best node.
  constexpr int kGrid = 1024;
  int best = 0;
  double best_val = kNegInf;
  for (int j = 0; j <= kGrid; ++j) {
    const double t = hi * j / kGrid;
    const double v = f(t);
    if (v > best_val) {
      best_val = v;
      best = j;
    }
  }
  const double a = hi * std::max(0, best - 1) / kGrid;
  const double b = hi * std::min(kGrid, best + 1) / kGrid;
  const double t_grid = brent_max(f, a, b, cap);
  double result = t_grid;
  for (double t : {t_bracket, t_global}) {
    if (f(t) > f(result)) result = t;
  }
  return result;
}

IntegrationInterval integration_interval(double t_hat, double curv, double t_sup,
                                         const std::function<double(double)>& f,
                                         const DirectionalOptions& options) {
  IntegrationInterval iv;
  if (!(curv < 0.0) || !std::isfinite(curv)) {
    iv.t_min = 0.0;
    iv.t_max = t_sup;
    iv.full_range = true;
    return iv;
  }
  const double sigma = 1.0 / std::sqrt(-curv);
  const double c = options.width_sigmas;
  iv.t_min = std::max(0.0, t_hat - c * sigma);
  iv.t_max = std::min(t_sup, t_hat + c * sigma);
  if (f) {
    const double peak = f(t_hat);
    for (int it = 0; it < 200 && iv.t_min > 0.0 && f(iv.t_min) > peak - options.min_drop; ++it) {
      iv.t_min = std::max(0.0, t_hat - 2.0 * (t_hat - iv.t_min));
    }
    for (int it = 0; it < 200 && iv.t_max < t_sup && f(iv.t_max) > peak - options.min_drop; ++it) {
      iv.t_max = std::min(t_sup, t_hat + 2.0 * (iv.t_max - t_hat));
    }
  }
  iv.t_min = std::min(iv.t_min, 1.0);
  iv.t_max = std::min(std::max(iv.t_max, 1.0), t_sup);
  return iv;
}

double integrate_log(const std::function<double(double)>& f, double shift, double a, double b,
                     const DirectionalOptions& options) {
  if (!(b > a)) return 0.0;
  auto g = [&](double t) {
    const double v = f(t);
    return std::isfinite(v) ? std::exp(v - shift) : 0.0;
  };
  if (options.quadrature == Quadrature::kTrapezoid) {
    const int n = std::max(2, options.trapezoid_nodes);
    const double h = (b - a) / (n - 1);
    double s = 0.5 * (g(a) + g(b));
    for (int j = 1; j < n - 1; ++j) s += g(a + j * h);
    return s * h;
  }
  double err = 0.0;
  double l1 = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 15>::integrate(g, a, b, 30, options.rel_tol, &err, &l1);
  if (err > std::max(1e3 * options.rel_tol * std::abs(value), options.abs_tol)) {
    throw NoConvergence("adaptive quadrature did not reach its tolerance (error " + std::to_string(err) + ")");
  }
  return value;
}

DirectionalDiagnostics directional_pvalue(const GbarFunction& g, const DirectionalOptions& options) {
  DirectionalDiagnostics diag;
  diag.t_sup = g.t_sup;
  const auto& f = g.value;

  double upper = g.t_sup;
  if (!std::isfinite(upper)) {
    const double f1 = f(1.0);
    upper = 2.0;
    while (!(f(upper) < f1 - options.infinite_drop && f(upper) < f(0.5 * upper))) {
      upper *= 2.0;
      if (upper > 1e12) throw NoConvergence("log integrand does not decay on an unbounded range");
    }
  }
  diag.t_upper = upper;

  diag.t_hat = maximize_gbar(f, upper);
  diag.curvature_at_t_hat = g.curvature(diag.t_hat);
  const double peak = f(diag.t_hat);

  IntegrationInterval iv;
  if (options.narrow) {
    iv = integration_interval(diag.t_hat, diag.curvature_at_t_hat, upper, f, options);
  } else {
    iv = IntegrationInterval{0.0, upper, true};
  }
  diag.t_min = iv.t_min;
  diag.t_max = iv.t_max;
  diag.full_range = iv.full_range;

  const double lower_part = integrate_log(f, peak, iv.t_min, 1.0, options);
  diag.numerator = integrate_log(f, peak, 1.0, iv.t_max, options);
  diag.denominator = lower_part + diag.numerator;
  if (!(diag.denominator > 0.0)) throw NoConvergence("normalizing integral vanished");
  diag.p_value = std::clamp(diag.numerator / diag.denominator, 0.0, 1.0);
  return diag;
}

DirectionalDiagnostics directional_pvalue(const ConstrainedFit& fit, const DirectionalOptions& options) {
  if (!(lrt_mle(fit) > kDegenerateW)) {
    DirectionalDiagnostics diag;
    diag.degenerate = true;
    diag.p_value = 1.0;
    return diag;
  }
  return directional_pvalue(make_gbar(fit, options.path), options);
}

}  // namespace dirnormal
