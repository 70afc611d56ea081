#include "dirnormal/core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

#include "dirnormal/errors.hpp"

namespace dirnormal {

DataMatrix::DataMatrix(Matrix values) : values_(std::move(values)) {
  if (!values_.allFinite()) {
    throw NonFiniteError("data matrix contains NaN or infinite entries");
  }
}

SpdMatrix::SpdMatrix(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionError("SpdMatrix requires a square matrix, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  matrix_ = 0.5 * (m + m.transpose());
  llt_.compute(matrix_);
  if (llt_.info() != Eigen::Success || !matrix_.allFinite()) {
    throw NotPositiveDefinite("matrix is not positive definite");
  }
}

SpdMatrix SpdMatrix::identity(int p) { return SpdMatrix(Matrix::Identity(p, p)); }

double SpdMatrix::log_det() const {
  const auto& l = llt_.matrixLLT();
  return 2.0 * l.diagonal().array().log().sum();
}

Matrix SpdMatrix::inverse() const {
  Matrix inv = llt_.solve(Matrix::Identity(dim(), dim()));
  return 0.5 * (inv + inv.transpose());
}

std::optional<Eigen::LLT<Matrix>> try_cholesky(const Matrix& m) {
  if (!m.allFinite()) return std::nullopt;
  Eigen::LLT<Matrix> llt(0.5 * (m + m.transpose()));
  if (llt.info() != Eigen::Success) return std::nullopt;
  return llt;
}

SampleSummary summarize(const DataMatrix& data, SizeCheck check) {
  const int n = data.n();
  const int p = data.p();
  if (n < 1 || p < 1) throw DimensionError("empty data matrix");
  if (check == SizeCheck::kRequireMleExistence && n < p + 2) {
    throw DimensionError("need n >= p + 2 observations for the covariance MLE to exist (n=" +
                         std::to_string(n) + ", p=" + std::to_string(p) + ")");
  }
  const Matrix& y = data.values();
  SampleSummary s;
  s.n = n;
  s.p = p;
  s.ybar = y.colwise().mean().transpose();
  const Matrix centered = y.rowwise() - s.ybar.transpose();
  s.centered_ssq.noalias() = centered.transpose() * centered;
  s.centered_ssq = 0.5 * (s.centered_ssq + s.centered_ssq.transpose());
  s.mle_cov = s.centered_ssq / static_cast<double>(n);
  s.second_moment = s.mle_cov + s.ybar * s.ybar.transpose();
  return s;
}

SpdMatrix mle_cov_spd(const SampleSummary& s) {
  try {
    return SpdMatrix(s.mle_cov);
  } catch (const NotPositiveDefinite&) {
    throw NotPositiveDefinite("sample covariance MLE is singular (degenerate data)");
  }
}

CanonicalPoint CanonicalPoint::from_moments(const Vector& mu, const SpdMatrix& cov) {
  SpdMatrix conc(cov.inverse());
  Vector xi = conc.matrix() * mu;
  return CanonicalPoint{std::move(xi), std::move(conc)};
}

double log_det_spd(const SpdMatrix& m) { return m.log_det(); }

double info_log_det(const SpdMatrix& concentration, int n) {
  const double p = concentration.dim();
  return 0.5 * p * (p + 3.0) * std::log(static_cast<double>(n)) - p * std::log(2.0) -
         (p + 2.0) * concentration.log_det();
}

Matrix duplication_matrix(int p) {
  const int q = p * (p + 1) / 2;
  Matrix d = Matrix::Zero(p * p, q);
  int col = 0;
  for (int j = 0; j < p; ++j) {
    for (int i = j; i < p; ++i) {
      d(j * p + i, col) = 1.0;
      d(i * p + j, col) = 1.0;
      ++col;
    }
  }
  return d;
}

Vector vech(const Matrix& m) {
  const int p = static_cast<int>(m.rows());
  Vector v(p * (p + 1) / 2);
  int k = 0;
  for (int j = 0; j < p; ++j) {
    for (int i = j; i < p; ++i) v(k++) = m(i, j);
  }
  return v;
}

Vector eig_pencil(const SpdMatrix& lambda0_inv, const SpdMatrix& lambda_inv) {
  if (lambda0_inv.dim() != lambda_inv.dim()) {
    throw DimensionError("eig_pencil: dimension mismatch");
  }
  const auto l = lambda0_inv.llt().matrixL();
  // L^{-1} Lambda^{-1} L^{-T}
  Matrix tmp = l.solve(lambda_inv.matrix());
  Matrix sym = l.solve(tmp.transpose());
  sym = 0.5 * (sym + sym.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NoConvergence("eig_pencil: eigen solver failed");
  return es.eigenvalues();
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Engine make_engine(const StreamKey& key) {
  std::uint64_t h = splitmix64(key.seed);
  h = splitmix64(h ^ key.tag);
  h = splitmix64(h ^ key.index);
  h = splitmix64(h ^ key.phase);
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(key.index), static_cast<std::uint32_t>(key.tag)};
  return Engine(seq);
}

DataMatrix sample_mvn(const Vector& mu, const SpdMatrix& cov, int n, Engine& rng) {
  const int p = cov.dim();
  if (mu.size() != p) throw DimensionError("sample_mvn: mean and covariance sizes differ");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(n, p);
  // Row-major fill order so a stream gives the same rows regardless of n.
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) z(i, j) = normal(rng);
  }
  Matrix y = z * cov.llt().matrixU();
  y.rowwise() += mu.transpose();
  return DataMatrix(std::move(y));
}

DataMatrix sample_mvn(const Vector& mu, const SpdMatrix& cov, int n, std::uint64_t seed) {
  Engine rng = make_engine(StreamKey{seed, 0, 0, 0});
  return sample_mvn(mu, cov, n, rng);
}

}  // namespace dirnormal
