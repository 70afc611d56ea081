#include "dirnormal/hypotheses.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dirnormal/errors.hpp"

namespace dirnormal {

std::string_view case_name(Case c) {
  switch (c) {
    case Case::kProportionalIdentity: return "c1";
    case Case::kBlockIndependence: return "c2";
    case Case::kEqualDistributions: return "c3";
    case Case::kEqualCovariances: return "c4";
    case Case::kSpecifiedMeanCov: return "c5";
    case Case::kCompleteIndependence: return "c6";
    case Case::kZeroPattern: return "pattern";
  }
  return "unknown";
}

std::optional<Case> parse_case(std::string_view name) {
  for (Case c : {Case::kProportionalIdentity, Case::kBlockIndependence, Case::kEqualDistributions,
                 Case::kEqualCovariances, Case::kSpecifiedMeanCov, Case::kCompleteIndependence,
                 Case::kZeroPattern}) {
    if (case_name(c) == name) return c;
  }
  return std::nullopt;
}

bool has_linear_path(Case c) {
  return c != Case::kSpecifiedMeanCov && c != Case::kEqualDistributions;
}

// ---------------------------------------------------------------------------
// ZeroPattern

ZeroPattern::ZeroPattern(BoolMatrix allowed) : allowed_(std::move(allowed)) {
  if (allowed_.rows() != allowed_.cols()) throw DimensionError("zero pattern must be square");
  for (int i = 0; i < allowed_.rows(); ++i) {
    if (!allowed_(i, i)) throw DimensionError("zero pattern must allow every diagonal entry");
    for (int j = 0; j < i; ++j) {
      if (allowed_(i, j) != allowed_(j, i)) throw DimensionError("zero pattern must be symmetric");
    }
  }
}

ZeroPattern ZeroPattern::from_zero_pairs(int p, std::span<const std::pair<int, int>> zeros) {
  BoolMatrix m = BoolMatrix::Constant(p, p, true);
  for (auto [i, j] : zeros) {
    if (i < 0 || j < 0 || i >= p || j >= p) {
      throw DimensionError("zero pair (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                           ") outside a " + std::to_string(p) + "-variate pattern");
    }
    if (i == j) throw DimensionError("a diagonal entry cannot be constrained to zero");
    m(i, j) = false;
    m(j, i) = false;
  }
  return ZeroPattern(std::move(m));
}

ZeroPattern ZeroPattern::diagonal(int p) {
  BoolMatrix m = BoolMatrix::Constant(p, p, false);
  for (int i = 0; i < p; ++i) m(i, i) = true;
  return ZeroPattern(std::move(m));
}

int ZeroPattern::zero_pair_count() const {
  int count = 0;
  for (int j = 0; j < dim(); ++j) {
    for (int i = j + 1; i < dim(); ++i) count += allowed_(i, j) ? 0 : 1;
  }
  return count;
}

// ---------------------------------------------------------------------------
// HypothesisSpec

HypothesisSpec HypothesisSpec::proportional_identity() { return HypothesisSpec{}; }

HypothesisSpec HypothesisSpec::block_independence(std::vector<int> sizes) {
  HypothesisSpec s;
  s.kind = Case::kBlockIndependence;
  s.blocks = std::move(sizes);
  return s;
}

HypothesisSpec HypothesisSpec::equal_distributions() {
  HypothesisSpec s;
  s.kind = Case::kEqualDistributions;
  return s;
}

HypothesisSpec HypothesisSpec::equal_covariances() {
  HypothesisSpec s;
  s.kind = Case::kEqualCovariances;
  return s;
}

HypothesisSpec HypothesisSpec::specified(Vector mu0, SpdMatrix lambda0) {
  HypothesisSpec s;
  s.kind = Case::kSpecifiedMeanCov;
  s.mu0 = std::move(mu0);
  s.lambda0 = std::move(lambda0);
  return s;
}

HypothesisSpec HypothesisSpec::complete_independence() {
  HypothesisSpec s;
  s.kind = Case::kCompleteIndependence;
  return s;
}

HypothesisSpec HypothesisSpec::zero_pattern(ZeroPattern pattern) {
  HypothesisSpec s;
  s.kind = Case::kZeroPattern;
  s.pattern = std::move(pattern);
  return s;
}

void HypothesisSpec::validate(int p, int k) const {
  const std::string name(case_name(kind));
  if (p < 1) throw DimensionError("dimension must be positive");
  if (grouped()) {
    if (k < 2) throw DimensionError(name + " compares groups and needs k >= 2, got " + std::to_string(k));
  } else if (k != 1) {
    throw DimensionError(name + " is a one-sample hypothesis, got " + std::to_string(k) + " groups");
  }
  switch (kind) {
    case Case::kProportionalIdentity:
    case Case::kCompleteIndependence:
      if (p < 2) throw DimensionError(name + " needs p >= 2 (the hypothesis is empty for p = 1)");
      break;
    case Case::kBlockIndependence: {
      if (blocks.size() < 2) throw DimensionError("c2 needs at least two blocks");
      if (std::any_of(blocks.begin(), blocks.end(), [](int b) { return b < 1; })) {
        throw DimensionError("c2 block sizes must be positive");
      }
      const int total = std::accumulate(blocks.begin(), blocks.end(), 0);
      if (total != p) {
        throw DimensionError("c2 block sizes sum to " + std::to_string(total) + " but p = " + std::to_string(p));
      }
      break;
    }
    case Case::kSpecifiedMeanCov:
      if (!lambda0 || mu0.size() != p || lambda0->dim() != p) {
        throw DimensionError("c5 needs mu0 of length p and a p x p Lambda0");
      }
      break;
    case Case::kZeroPattern:
      if (pattern.dim() != p) throw DimensionError("zero pattern dimension differs from p");
      if (pattern.zero_pair_count() == 0) throw DimensionError("zero pattern constrains no entry");
      break;
    case Case::kEqualDistributions:
    case Case::kEqualCovariances:
      break;
  }
}

int degrees_of_freedom(const HypothesisSpec& spec, int p, int k) {
  const int full = p * (p + 1) / 2;
  switch (spec.kind) {
    case Case::kProportionalIdentity: return full - 1;
    case Case::kBlockIndependence: {
      int within = 0;
      for (int b : spec.blocks) within += b * (b + 1) / 2;
      return full - within;
    }
    case Case::kEqualDistributions: return p * (p + 3) * (k - 1) / 2;
    case Case::kEqualCovariances: return full * (k - 1);
    case Case::kSpecifiedMeanCov: return p * (p + 3) / 2;
    case Case::kCompleteIndependence: return p * (p - 1) / 2;
    case Case::kZeroPattern: return spec.pattern.zero_pair_count();
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Constrained fits

SpdMatrix fit_zero_pattern(const SpdMatrix& mle_cov, const ZeroPattern& pattern, double tol,
                           int max_sweeps) {
  const int p = mle_cov.dim();
  if (pattern.dim() != p) throw DimensionError("zero pattern dimension differs from covariance");
  const Matrix& s = mle_cov.matrix();
  if (pattern.zero_pair_count() == 0) return mle_cov;
  if (pattern.zero_pair_count() == p * (p - 1) / 2) return SpdMatrix(Matrix(s.diagonal().asDiagonal()));

  // Generators: every allowed edge, plus vertices that belong to no edge.
  std::vector<std::vector<int>> gens;
  for (int i = 0; i < p; ++i) {
    bool isolated = true;
    for (int j = 0; j < p; ++j) {
      if (j != i && pattern.allowed(i, j)) {
        isolated = false;
        if (j > i) gens.push_back({i, j});
      }
    }
    if (isolated) gens.push_back({i});
  }

  Matrix k = Matrix::Zero(p, p);
  Matrix sigma = Matrix::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    k(i, i) = 1.0 / s(i, i);
    sigma(i, i) = s(i, i);
  }

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (const auto& c : gens) {
      const int m = static_cast<int>(c.size());
      Matrix s_cc(m, m), sig_cc(m, m), sig_c(p, m);
      for (int a = 0; a < m; ++a) {
        sig_c.col(a) = sigma.col(c[a]);
        for (int b = 0; b < m; ++b) {
          s_cc(a, b) = s(c[a], c[b]);
          sig_cc(a, b) = sigma(c[a], c[b]);
        }
      }
      // K_CC += S_CC^{-1} - Sigma_CC^{-1}, then a Woodbury update of Sigma.
      const Matrix delta = s_cc.inverse() - sig_cc.inverse();
      for (int a = 0; a < m; ++a) {
        for (int b = 0; b < m; ++b) k(c[a], c[b]) += delta(a, b);
      }
      const Matrix inner = (Matrix::Identity(m, m) + delta * sig_cc).inverse() * delta;
      const Matrix update = sig_c * inner * sig_c.transpose();
      sigma -= update;
      sigma = 0.5 * (sigma + sigma.transpose());
    }
    // Largest scaled mismatch of the fitted marginals.
    double residual = 0.0;
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j <= i; ++j) {
        if (!pattern.allowed(i, j)) continue;
        residual = std::max(residual, std::abs(sigma(i, j) - s(i, j)) / std::sqrt(s(i, i) * s(j, j)));
      }
    }
    if (residual < tol) {
      SpdMatrix conc(k);
      return SpdMatrix(conc.inverse());
    }
  }
  throw NoConvergence("zero-pattern fit did not converge within " + std::to_string(max_sweeps) + " sweeps");
}

namespace {

Matrix block_diagonal_part(const Matrix& m, const std::vector<int>& blocks) {
  Matrix out = Matrix::Zero(m.rows(), m.cols());
  int start = 0;
  for (int b : blocks) {
    out.block(start, start, b, b) = m.block(start, start, b, b);
    start += b;
  }
  return out;
}

}  // namespace

std::vector<SampleSummary> summarize_groups(const GroupedData& groups) {
  std::vector<SampleSummary> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(summarize(g));
  return out;
}

ConstrainedFit constrained_mle(const HypothesisSpec& spec, std::span<const SampleSummary> summaries) {
  if (summaries.empty()) throw DimensionError("no data groups supplied");
  const int p = summaries.front().p;
  const int k = static_cast<int>(summaries.size());
  for (const auto& s : summaries) {
    if (s.p != p) throw DimensionError("groups have different numbers of variables");
    if (s.n < p + 2) {
      throw DimensionError("need n >= p + 2 observations per group (n=" + std::to_string(s.n) +
                           ", p=" + std::to_string(p) + ")");
    }
  }
  spec.validate(p, k);

  ConstrainedFit fit;
  fit.kind = spec.kind;
  fit.p = p;
  fit.d = degrees_of_freedom(spec, p, k);
  for (const auto& s : summaries) fit.n_total += s.n;

  if (spec.kind == Case::kSpecifiedMeanCov) {
    fit.standardized = true;
    fit.groups.push_back(standardize_summary(summaries.front(), spec.mu0, *spec.lambda0));
  } else {
    fit.groups.assign(summaries.begin(), summaries.end());
  }
  for (const auto& g : fit.groups) fit.group_cov.push_back(mle_cov_spd(g));

  const Matrix& cov1 = fit.group_cov.front().matrix();
  const double n = fit.n_total;
  Matrix lambda0_inv;
  switch (spec.kind) {
    case Case::kProportionalIdentity:
      lambda0_inv = Matrix::Identity(p, p) * (cov1.trace() / p);
      break;
    case Case::kBlockIndependence:
      lambda0_inv = block_diagonal_part(cov1, spec.blocks);
      break;
    case Case::kCompleteIndependence:
      lambda0_inv = cov1.diagonal().asDiagonal();
      break;
    case Case::kZeroPattern:
      lambda0_inv = fit_zero_pattern(fit.group_cov.front(), spec.pattern).matrix();
      break;
    case Case::kSpecifiedMeanCov:
      lambda0_inv = Matrix::Identity(p, p);
      break;
    case Case::kEqualCovariances: {
      lambda0_inv = Matrix::Zero(p, p);
      for (const auto& g : fit.groups) lambda0_inv += g.centered_ssq;
      lambda0_inv /= n;
      break;
    }
    case Case::kEqualDistributions: {
      fit.pooled_mean = Vector::Zero(p);
      for (const auto& g : fit.groups) fit.pooled_mean += g.n * g.ybar;
      fit.pooled_mean /= n;
      // (A + B) / n with B the between-group scatter.
      lambda0_inv = Matrix::Zero(p, p);
      for (const auto& g : fit.groups) {
        const Vector b = g.ybar - fit.pooled_mean;
        lambda0_inv += g.centered_ssq + g.n * b * b.transpose();
      }
      lambda0_inv /= n;
      break;
    }
  }
  try {
    fit.lambda0_inv = SpdMatrix(lambda0_inv);
  } catch (const NotPositiveDefinite&) {
    throw NotPositiveDefinite("constrained covariance estimate is not positive definite");
  }

  for (const auto& g : fit.groups) {
    if (spec.kind == Case::kSpecifiedMeanCov) {
      fit.mu0.push_back(Vector::Zero(p));
    } else if (spec.kind == Case::kEqualDistributions) {
      fit.mu0.push_back(fit.pooled_mean);
    } else {
      fit.mu0.push_back(g.ybar);
    }
  }
  if (has_linear_path(spec.kind)) {
    for (const auto& c : fit.group_cov) fit.pencil_eigs.push_back(eig_pencil(fit.lambda0_inv, c));
  }
  return fit;
}

std::vector<SufficientBlock> expected_s_psi(const ConstrainedFit& fit) {
  std::vector<SufficientBlock> out;
  const int p = fit.p;
  for (int i = 0; i < fit.k(); ++i) {
    const auto& g = fit.groups[i];
    const double ni = g.n;
    SufficientBlock blk;
    Matrix m;
    switch (fit.kind) {
      case Case::kSpecifiedMeanCov:
        blk.mean = -ni * g.ybar;
        m = Matrix::Identity(p, p) - g.second_moment;
        break;
      case Case::kEqualDistributions:
        blk.mean = -ni * (g.ybar - fit.pooled_mean);
        m = fit.lambda0_inv.matrix() - g.second_moment + fit.pooled_mean * fit.pooled_mean.transpose();
        break;
      default:
        blk.mean = Vector::Zero(p);
        m = fit.lambda0_inv.matrix() - fit.group_cov[i].matrix();
        break;
    }
    blk.sym = -0.5 * ni * m;
    out.push_back(std::move(blk));
  }
  return out;
}

bool is_degenerate(const ConstrainedFit& fit, double tol) {
  const double scale = 1.0 + fit.lambda0_inv.matrix().cwiseAbs().maxCoeff();
  for (const auto& blk : expected_s_psi(fit)) {
    const double n = fit.n_total;
    if (blk.mean.size() > 0 && blk.mean.cwiseAbs().maxCoeff() > tol * n * std::sqrt(scale)) return false;
    if (blk.sym.cwiseAbs().maxCoeff() > tol * n * scale) return false;
  }
  return true;
}

Matrix path_cov(const ConstrainedFit& fit, int group, double t) {
  const Matrix& a = fit.lambda0_inv.matrix();
  const Matrix& c = fit.group_cov[group].matrix();
  Matrix m = (1.0 - t) * a + t * c;
  if (!has_linear_path(fit.kind)) {
    const Vector b = fit.groups[group].ybar - fit.mu0[group];
    m += t * (1.0 - t) * b * b.transpose();
  }
  return m;
}

PathPoint path_estimates(const ConstrainedFit& fit, double t) {
  if (!(t >= 0.0)) throw NotPositiveDefinite("path parameter t must be nonnegative");
  PathPoint pt;
  pt.t = t;
  for (int i = 0; i < fit.k(); ++i) {
    Matrix cov = path_cov(fit, i, t);
    if (!is_positive_definite(cov)) {
      throw NotPositiveDefinite("tilted covariance is not positive definite at t = " + std::to_string(t));
    }
    pt.cov.push_back(std::move(cov));
    pt.mean.push_back((1.0 - t) * fit.mu0[i] + t * fit.groups[i].ybar);
  }
  return pt;
}

DataMatrix standardize_case5(const DataMatrix& data, const Vector& mu0, const SpdMatrix& lambda0) {
  if (mu0.size() != data.p() || lambda0.dim() != data.p()) {
    throw DimensionError("mu0 / Lambda0 dimensions differ from the data");
  }
  Matrix centered = data.values().rowwise() - mu0.transpose();
  return DataMatrix(centered * lambda0.lower());
}

SampleSummary standardize_summary(const SampleSummary& s, const Vector& mu0, const SpdMatrix& lambda0) {
  if (mu0.size() != s.p || lambda0.dim() != s.p) {
    throw DimensionError("mu0 / Lambda0 dimensions differ from the data");
  }
  const Matrix l = lambda0.lower();
  SampleSummary out;
  out.n = s.n;
  out.p = s.p;
  out.ybar = l.transpose() * (s.ybar - mu0);
  out.mle_cov = l.transpose() * s.mle_cov * l;
  out.mle_cov = 0.5 * (out.mle_cov + out.mle_cov.transpose());
  out.centered_ssq = out.mle_cov * static_cast<double>(s.n);
  out.second_moment = out.mle_cov + out.ybar * out.ybar.transpose();
  return out;
}

}  // namespace dirnormal
