#pragma once

// Reference computations for the test suites. Everything here is written
// from first principles on raw data and dense matrices, sharing no code path
// with the library beyond the Matrix typedefs and the data generators.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "dirnormal/core.hpp"
#include "dirnormal/hypotheses.hpp"

namespace oracle {

using dirnormal::Matrix;
using dirnormal::Vector;

/// (row, col) of each vech coordinate, column by column, row >= col.
inline std::vector<std::pair<int, int>> vech_pairs(int p) {
  std::vector<std::pair<int, int>> out;
  for (int c = 0; c < p; ++c) {
    for (int r = c; r < p; ++r) out.emplace_back(r, c);
  }
  return out;
}

inline double det_cofactor(const Matrix& m) {
  const int n = static_cast<int>(m.rows());
  if (n == 1) return m(0, 0);
  if (n == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  double det = 0.0;
  for (int j = 0; j < n; ++j) {
    Matrix minor(n - 1, n - 1);
    for (int r = 1; r < n; ++r) {
      for (int c = 0, cc = 0; c < n; ++c) {
        if (c == j) continue;
        minor(r - 1, cc++) = m(r, c);
      }
    }
    det += ((j % 2) ? -1.0 : 1.0) * m(0, j) * det_cofactor(minor);
  }
  return det;
}

inline double log_abs_det_lu(const Matrix& m) {
  const Eigen::PartialPivLU<Matrix> lu(m);
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) s += std::log(std::abs(lu.matrixLU()(i, i)));
  return s;
}

inline double log_det_sym(const Matrix& m) { return log_abs_det_lu(m); }

inline Matrix spd_inverse(const Matrix& m) { return m.fullPivLu().inverse(); }

/// Fisher information of the canonical parameter (xi, vech Lambda) for n
/// observations, assembled entry by entry as n times the covariance matrix
/// of the per-observation statistic (y, -1/2 w(y y^T)), where w doubles the
/// off-diagonal entries so that tr(Lambda Y) = vech(Lambda)^T w(Y).
inline Matrix info_matrix(const Vector& mu, const Matrix& sigma, int n) {
  const int p = static_cast<int>(mu.size());
  const auto pairs = vech_pairs(p);
  const int m = static_cast<int>(pairs.size());
  Matrix j = Matrix::Zero(p + m, p + m);
  auto a = [](int r, int c) { return r == c ? 1.0 : 2.0; };
  j.topLeftCorner(p, p) = sigma;
  for (int q = 0; q < m; ++q) {
    const auto [r, c] = pairs[q];
    for (int i = 0; i < p; ++i) {
      const double cov = sigma(i, r) * mu(c) + sigma(i, c) * mu(r);
      j(i, p + q) = j(p + q, i) = -0.5 * a(r, c) * cov;
    }
    for (int q2 = 0; q2 < m; ++q2) {
      const auto [s, t] = pairs[q2];
      const double cov = sigma(r, s) * sigma(c, t) + sigma(r, t) * sigma(c, s) + mu(r) * mu(s) * sigma(c, t) +
                         mu(r) * mu(t) * sigma(c, s) + mu(c) * mu(s) * sigma(r, t) + mu(c) * mu(t) * sigma(r, s);
      j(p + q, p + q2) = 0.25 * a(r, c) * a(s, t) * cov;
    }
  }
  return n * j;
}

inline Vector canonical(const Vector& mu, const Matrix& sigma) {
  const int p = static_cast<int>(mu.size());
  const Matrix lambda = spd_inverse(sigma);
  const auto pairs = vech_pairs(p);
  Vector phi(p + static_cast<int>(pairs.size()));
  phi.head(p) = lambda * mu;
  for (std::size_t q = 0; q < pairs.size(); ++q) phi(p + q) = lambda(pairs[q].first, pairs[q].second);
  return phi;
}

/// Expected canonical statistic of n observations.
inline Vector mean_statistic(const Vector& mu, const Matrix& sigma, int n) {
  const int p = static_cast<int>(mu.size());
  const auto pairs = vech_pairs(p);
  const Matrix second = sigma + mu * mu.transpose();
  Vector u(p + static_cast<int>(pairs.size()));
  u.head(p) = n * mu;
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    const auto [r, c] = pairs[q];
    u(p + q) = -0.5 * (r == c ? 1.0 : 2.0) * n * second(r, c);
  }
  return u;
}

/// Observed canonical statistic from raw rows.
inline Vector observed_statistic(const Matrix& y) {
  const int p = static_cast<int>(y.cols());
  const auto pairs = vech_pairs(p);
  Vector u = Vector::Zero(p + static_cast<int>(pairs.size()));
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (int a = 0; a < p; ++a) u(a) += y(i, a);
    for (std::size_t q = 0; q < pairs.size(); ++q) {
      const auto [r, c] = pairs[q];
      u(p + q) += -0.5 * (r == c ? 1.0 : 2.0) * y(i, r) * y(i, c);
    }
  }
  return u;
}

/// Cumulant function per observation: 1/2 mu^T Lambda mu + 1/2 log|Sigma|.
inline double cumulant(const Vector& mu, const Matrix& sigma) {
  return 0.5 * mu.dot(spd_inverse(sigma) * mu) + 0.5 * log_det_sym(sigma);
}

/// Gaussian log-likelihood of the rows of y, evaluated term by term.
inline double loglik(const Matrix& y, const Vector& mu, const Matrix& sigma) {
  const int p = static_cast<int>(y.cols());
  const Matrix lambda = spd_inverse(sigma);
  const double ld = log_det_sym(sigma);
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const Vector r = y.row(i).transpose() - mu;
    s += -0.5 * r.dot(lambda * r) - 0.5 * ld - 0.5 * p * std::log(2.0 * std::numbers::pi);
  }
  return s;
}

struct Fit {
  Vector mu;
  Matrix sigma;
};

/// Sample mean and covariance MLE by explicit loops.
inline Fit sample_fit(const Matrix& y) {
  const int n = static_cast<int>(y.rows());
  const int p = static_cast<int>(y.cols());
  Vector mu = Vector::Zero(p);
  for (int i = 0; i < n; ++i) mu += y.row(i).transpose();
  mu /= n;
  Matrix s = Matrix::Zero(p, p);
  for (int i = 0; i < n; ++i) {
    const Vector r = y.row(i).transpose() - mu;
    s += r * r.transpose();
  }
  return {mu, s / n};
}

/// Closed-form constrained fits recomputed from raw data. Pattern and the
/// specified case take their null covariance from the caller.
inline std::vector<Fit> null_fit(dirnormal::Case kind, const std::vector<Matrix>& ys,
                                 const std::vector<int>& blocks = {}, const Vector& mu0 = {},
                                 const Matrix& sigma0 = {}) {
  using dirnormal::Case;
  std::vector<Fit> hats;
  for (const auto& y : ys) hats.push_back(sample_fit(y));
  const int p = static_cast<int>(ys.front().cols());
  std::vector<Fit> out;
  switch (kind) {
    case Case::kProportionalIdentity: {
      const Fit& h = hats.front();
      out.push_back({h.mu, Matrix::Identity(p, p) * h.sigma.trace() / p});
      break;
    }
    case Case::kCompleteIndependence: {
      const Fit& h = hats.front();
      out.push_back({h.mu, Matrix(h.sigma.diagonal().asDiagonal())});
      break;
    }
    case Case::kBlockIndependence: {
      const Fit& h = hats.front();
      Matrix s = Matrix::Zero(p, p);
      int at = 0;
      for (int b : blocks) {
        s.block(at, at, b, b) = h.sigma.block(at, at, b, b);
        at += b;
      }
      out.push_back({h.mu, s});
      break;
    }
    case Case::kEqualDistributions: {
      Matrix all(0, p);
      for (const auto& y : ys) {
        Matrix next(all.rows() + y.rows(), p);
        next << all, y;
        all = next;
      }
      const Fit pooled = sample_fit(all);
      for (std::size_t i = 0; i < ys.size(); ++i) out.push_back(pooled);
      break;
    }
    case Case::kEqualCovariances: {
      Matrix a = Matrix::Zero(p, p);
      int n = 0;
      for (std::size_t i = 0; i < ys.size(); ++i) {
        a += hats[i].sigma * static_cast<double>(ys[i].rows());
        n += static_cast<int>(ys[i].rows());
      }
      for (const auto& h : hats) out.push_back({h.mu, a / n});
      break;
    }
    case Case::kSpecifiedMeanCov:
    case Case::kZeroPattern:
      for (const auto& h : hats) out.push_back({mu0.size() ? mu0 : h.mu, sigma0});
      break;
  }
  return out;
}

inline std::vector<Fit> sample_fits(const std::vector<Matrix>& ys) {
  std::vector<Fit> out;
  for (const auto& y : ys) out.push_back(sample_fit(y));
  return out;
}

/// 2 {l(unconstrained) - l(constrained)} from the explicit log-likelihood.
inline double lrt(const std::vector<Matrix>& ys, const std::vector<Fit>& hat, const std::vector<Fit>& psi) {
  double s = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    s += loglik(ys[i], hat[i].mu, hat[i].sigma) - loglik(ys[i], psi[i].mu, psi[i].sigma);
  }
  return 2.0 * s;
}

/// Skovgaard's log gamma from stacked statistics, parameters and
/// information matrices of every group.
inline double log_gamma(const std::vector<Matrix>& ys, const std::vector<Fit>& hat, const std::vector<Fit>& psi,
                        int d) {
  const int k = static_cast<int>(ys.size());
  const int p = static_cast<int>(ys.front().cols());
  const int m = p + p * (p + 1) / 2;
  Vector ds(k * m), dphi(k * m);
  Matrix j_psi = Matrix::Zero(k * m, k * m), j_hat = Matrix::Zero(k * m, k * m);
  for (int i = 0; i < k; ++i) {
    const int n = static_cast<int>(ys[i].rows());
    ds.segment(i * m, m) = observed_statistic(ys[i]) - mean_statistic(psi[i].mu, psi[i].sigma, n);
    dphi.segment(i * m, m) = canonical(hat[i].mu, hat[i].sigma) - canonical(psi[i].mu, psi[i].sigma);
    j_psi.block(i * m, i * m, m, m) = info_matrix(psi[i].mu, psi[i].sigma, n);
    j_hat.block(i * m, i * m, m, m) = info_matrix(hat[i].mu, hat[i].sigma, n);
  }
  const double q2 = ds.dot(j_psi.fullPivLu().solve(ds));
  const double q1 = dphi.dot(ds);
  const double w = lrt(ys, hat, psi);
  return 0.5 * d * std::log(q2) - (0.5 * d - 1.0) * std::log(w) - std::log(q1) +
         0.5 * (log_abs_det_lu(j_psi) - log_abs_det_lu(j_hat));
}

/// Mean-value point of the tilted statistic u(t) = t u_obs + (1 - t) E_psi u.
inline Fit tilted_fit(const Fit& hat, const Fit& psi, double t) {
  const Vector mu = t * hat.mu + (1.0 - t) * psi.mu;
  const Matrix second = t * (hat.sigma + hat.mu * hat.mu.transpose()) +
                        (1.0 - t) * (psi.sigma + psi.mu * psi.mu.transpose());
  return {mu, second - mu * mu.transpose()};
}

/// (d - 1) log t + log of the saddlepoint density at s(t), up to a t-free
/// constant: l(phi_psi; u(t)) - l(phi_hat(t); u(t)) - 1/2 log|J(phi_hat(t))|.
inline double gbar(const std::vector<Fit>& hat, const std::vector<Fit>& psi, const std::vector<int>& sizes, int d,
                   double t) {
  double v = (d - 1) * std::log(t);
  for (std::size_t i = 0; i < hat.size(); ++i) {
    const int n = sizes[i];
    const Fit ft = tilted_fit(hat[i], psi[i], t);
    const Vector u = mean_statistic(ft.mu, ft.sigma, n);
    const double l_psi = canonical(psi[i].mu, psi[i].sigma).dot(u) - n * cumulant(psi[i].mu, psi[i].sigma);
    const double l_t = canonical(ft.mu, ft.sigma).dot(u) - n * cumulant(ft.mu, ft.sigma);
    v += l_psi - l_t - 0.5 * log_abs_det_lu(info_matrix(ft.mu, ft.sigma, n));
  }
  return v;
}

/// Ratio of two composite trapezoid integrals of exp(f - shift) with
/// `nodes` points each: over [1, upper] and [0, upper]. Points where f is
/// not finite contribute zero.
inline double trapezoid_pvalue(const std::function<double(double)>& f, double upper, int nodes) {
  auto eval = [&](double t) {
    const double v = f(t);
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  };
  std::vector<double> vals(nodes);
  const double h = upper / (nodes - 1);
  double shift = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < nodes; ++i) {
    vals[i] = eval(i * h);
    shift = std::max(shift, vals[i]);
  }
  auto sum = [&](const std::vector<double>& v, double step) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double w = (i == 0 || i + 1 == v.size()) ? 0.5 : 1.0;
      s += w * std::exp(v[i] - shift);
    }
    return s * step;
  };
  const double den = sum(vals, h);
  const double h1 = (upper - 1.0) / (nodes - 1);
  std::vector<double> top(nodes);
  for (int i = 0; i < nodes; ++i) top[i] = eval(1.0 + i * h1);
  return upper > 1.0 ? sum(top, h1) / den : 0.0;
}

/// P(chi2_d > x) by composite Simpson on the density of u = sqrt(t), which
/// is smooth at the origin for every d, integrated over the upper tail
/// directly so that small probabilities keep their relative accuracy.
inline double chisq_tail_simpson(double x, int d, int intervals = 200000) {
  const double k = 0.5 * d;
  const double log_norm = -k * std::log(2.0) - std::lgamma(k);
  // t^{k-1} e^{-t/2} dt with t = u^2 becomes 2 u^{2k-1} e^{-u^2/2} du.
  auto dens = [&](double u) {
    if (u <= 0.0) return d == 1 ? 2.0 * std::exp(log_norm) : 0.0;
    return 2.0 * std::exp(log_norm + (2.0 * k - 1.0) * std::log(u) - 0.5 * u * u);
  };
  const double a = std::sqrt(x);
  const double b = std::sqrt(x + 400.0 + 20.0 * d);
  const double h = (b - a) / intervals;
  double s = dens(a) + dens(b);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * dens(a + i * h);
  return s * h / 3.0;
}

/// Golden-section maximization on [a, b].
inline double golden_max(const std::function<double(double)>& f, double a, double b, int iters = 200) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), e = a + g * (b - a);
  double fc = f(c), fe = f(e);
  for (int i = 0; i < iters; ++i) {
    if (fc > fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + g * (b - a);
      fe = f(e);
    }
  }
  return 0.5 * (a + b);
}

/// Central second difference with one Richardson step.
inline double second_derivative(const std::function<double(double)>& f, double t, double h) {
  auto d2 = [&](double s) { return (f(t + s) - 2.0 * f(t) + f(t - s)) / (s * s); };
  return (4.0 * d2(0.5 * h) - d2(h)) / 3.0;
}

/// Brute-force one-sample Kolmogorov-Smirnov distance against U(0, 1).
inline double ks_distance(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    d = std::max(d, std::abs((i + 1) / n - x[i]));
    d = std::max(d, std::abs(x[i] - i / n));
  }
  return d;
}

inline Matrix random_spd(int p, dirnormal::Engine& rng, double ridge = 0.5) {
  std::normal_distribution<double> z;
  Matrix a(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) a(i, j) = z(rng);
  }
  return a * a.transpose() / p + ridge * Matrix::Identity(p, p);
}

inline Matrix random_normal(int n, int p, dirnormal::Engine& rng) {
  std::normal_distribution<double> z;
  Matrix y(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) y(i, j) = z(rng);
  }
  return y;
}

}  // namespace oracle
