#pragma once

// Dense symmetric linear algebra and multivariate-normal sufficient
// statistics shared by every test in the library.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace dirnormal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raw observations, one row per observation. All entries must be finite.
class DataMatrix {
 public:
  DataMatrix() = default;
  explicit DataMatrix(Matrix values);

  const Matrix& values() const { return values_; }
  int n() const { return static_cast<int>(values_.rows()); }
  int p() const { return static_cast<int>(values_.cols()); }

 private:
  Matrix values_;
};

/// One data matrix per group.
using GroupedData = std::vector<DataMatrix>;

/// Symmetric positive definite matrix with its Cholesky factor.
///
/// The input is symmetrized as (M + M^T) / 2 before factorization, so
/// rounding asymmetries from upstream arithmetic never reach the factor.
/// Construction throws NotPositiveDefinite when the factorization fails.
class SpdMatrix {
 public:
  SpdMatrix() = default;  // empty 0x0 placeholder
  explicit SpdMatrix(const Matrix& m);

  static SpdMatrix identity(int p);

  const Matrix& matrix() const { return matrix_; }
  const Eigen::LLT<Matrix>& llt() const { return llt_; }
  Matrix lower() const { return llt_.matrixL(); }
  int dim() const { return static_cast<int>(matrix_.rows()); }

  double log_det() const;
  Matrix inverse() const;

 private:
  Matrix matrix_;
  Eigen::LLT<Matrix> llt_;
};

/// Cholesky factor of the symmetrized input, or nullopt when the matrix is
/// not numerically positive definite.
std::optional<Eigen::LLT<Matrix>> try_cholesky(const Matrix& m);

inline bool is_positive_definite(const Matrix& m) { return try_cholesky(m).has_value(); }

/// Per-group sufficient statistics.
struct SampleSummary {
  int n = 0;
  int p = 0;
  Vector ybar;           // sample mean
  Matrix second_moment;  // y^T y / n
  Matrix mle_cov;        // y^T y / n - ybar ybar^T
  Matrix centered_ssq;   // A = y^T y - n ybar ybar^T
};

enum class SizeCheck {
  kRequireMleExistence,  // n >= p + 2
  kNone,
};

/// Sample mean, second moment and covariance MLE of the data.
///
/// mle_cov is only positive semidefinite in general; degenerate data (for
/// example identical rows) yields a singular estimate which callers reject
/// through SpdMatrix. Throws DimensionError when n < p + 2 unless the check
/// is disabled.
SampleSummary summarize(const DataMatrix& data,
                        SizeCheck check = SizeCheck::kRequireMleExistence);

SpdMatrix mle_cov_spd(const SampleSummary& s);

/// Canonical parameter (xi, Lambda) with xi = Lambda mu.
struct CanonicalPoint {
  Vector xi;
  SpdMatrix concentration;

  static CanonicalPoint from_moments(const Vector& mu, const SpdMatrix& cov);
};

double log_det_spd(const SpdMatrix& m);

/// log|J| of the observed information for the canonical parameter of n
/// i.i.d. N_p observations with concentration Lambda:
/// (p(p+3)/2) log n - p log 2 - (p+2) log|Lambda|. Independent of xi.
double info_log_det(const SpdMatrix& concentration, int n);

/// D_p with D_p vech(M) = vec(M) for symmetric M (column-major vec).
Matrix duplication_matrix(int p);

/// Lower-triangular half-vectorization, column by column.
Vector vech(const Matrix& m);

/// Eigenvalues of Lambda0 Lambda^{-1} (ascending), computed from the
/// congruent symmetric matrix L^{-1} Lambda^{-1} L^{-T} with
/// Lambda0^{-1} = L L^T.
Vector eig_pencil(const SpdMatrix& lambda0_inv, const SpdMatrix& lambda_inv);

using Engine = std::mt19937_64;

/// Key of an independent random stream. Streams with distinct keys are
/// statistically independent and do not depend on scheduling.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t tag = 0;    // case id or other namespace
  std::uint64_t index = 0;  // replication index
  std::uint64_t phase = 0;  // null / alternative / calibration
};

Engine make_engine(const StreamKey& key);

/// n rows i.i.d. N_p(mu, cov) via the Cholesky factor of cov.
DataMatrix sample_mvn(const Vector& mu, const SpdMatrix& cov, int n, Engine& rng);
DataMatrix sample_mvn(const Vector& mu, const SpdMatrix& cov, int n, std::uint64_t seed);

}  // namespace dirnormal
