#pragma once

// The null hypotheses on mean vectors and concentration matrices, their
// constrained maximum likelihood fits and the tilted path s(t) = (1 - t) s_psi
// that both the Skovgaard factor and the directional p-value are built on.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dirnormal/core.hpp"

namespace dirnormal {

enum class Case {
  kProportionalIdentity = 1,  // Sigma = sigma^2 I
  kBlockIndependence = 2,     // off-diagonal covariance blocks vanish
  kEqualDistributions = 3,    // mu_i and Lambda_i equal across k groups
  kEqualCovariances = 4,      // Lambda_i equal across k groups
  kSpecifiedMeanCov = 5,      // mu = mu0 and Lambda = Lambda0
  kCompleteIndependence = 6,  // diagonal covariance
  kZeroPattern = 7,           // prescribed zeros of Lambda
};

std::string_view case_name(Case c);  // "c1".."c6", "pattern"
std::optional<Case> parse_case(std::string_view name);

/// Whether the tilted covariance path is linear in t, so that every
/// quantity along it follows from the eigenvalues of Lambda0 Lambda_i^{-1}.
bool has_linear_path(Case c);

/// Adjacency of the concentration graph: allowed(i, j) is true when
/// Lambda_ij is unconstrained. The diagonal is always allowed.
class ZeroPattern {
 public:
  using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

  ZeroPattern() = default;
  explicit ZeroPattern(BoolMatrix allowed);

  /// Pattern with Lambda_ij = 0 for every listed pair (0-based).
  static ZeroPattern from_zero_pairs(int p, std::span<const std::pair<int, int>> zeros);
  /// All off-diagonal entries constrained to zero.
  static ZeroPattern diagonal(int p);

  int dim() const { return static_cast<int>(allowed_.rows()); }
  bool allowed(int i, int j) const { return allowed_(i, j); }
  int zero_pair_count() const;
  const BoolMatrix& matrix() const { return allowed_; }

 private:
  BoolMatrix allowed_;
};

struct HypothesisSpec {
  Case kind = Case::kProportionalIdentity;
  std::vector<int> blocks;            // block sizes, kBlockIndependence
  Vector mu0;                         // kSpecifiedMeanCov
  std::optional<SpdMatrix> lambda0;   // kSpecifiedMeanCov, concentration
  ZeroPattern pattern;                // kZeroPattern

  static HypothesisSpec proportional_identity();
  static HypothesisSpec block_independence(std::vector<int> sizes);
  static HypothesisSpec equal_distributions();
  static HypothesisSpec equal_covariances();
  static HypothesisSpec specified(Vector mu0, SpdMatrix lambda0);
  static HypothesisSpec complete_independence();
  static HypothesisSpec zero_pattern(ZeroPattern pattern);

  bool grouped() const {
    return kind == Case::kEqualDistributions || kind == Case::kEqualCovariances;
  }

  /// Throws DimensionError when the spec cannot apply to k groups of
  /// dimension p (block sizes, pattern size, group count, d >= 1).
  void validate(int p, int k) const;
};

int degrees_of_freedom(const HypothesisSpec& spec, int p, int k);

/// Constrained fit under the null together with everything evaluated from
/// it downstream. `groups` are the working summaries: for kSpecifiedMeanCov
/// they are the standardized data, for which the null is mu = 0, Lambda = I.
struct ConstrainedFit {
  Case kind = Case::kProportionalIdentity;
  int p = 0;
  int n_total = 0;
  int d = 0;
  bool standardized = false;
  std::vector<SampleSummary> groups;
  std::vector<SpdMatrix> group_cov;  // unconstrained Lambda_i^{-1}
  SpdMatrix lambda0_inv;             // constrained covariance, shared by groups
  std::vector<Vector> mu0;           // constrained mean per group
  Vector pooled_mean;                // kEqualDistributions
  std::vector<Vector> pencil_eigs;   // per group, linear-path cases only

  int k() const { return static_cast<int>(groups.size()); }
};

ConstrainedFit constrained_mle(const HypothesisSpec& spec, std::span<const SampleSummary> summaries);

/// Iterative proportional scaling over the edges of the pattern. Returns the
/// covariance Sigma whose inverse has the prescribed zeros and whose entries
/// match mle_cov on the diagonal and on every allowed pair, to within tol
/// relative to sqrt(s_ii s_jj).
SpdMatrix fit_zero_pattern(const SpdMatrix& mle_cov, const ZeroPattern& pattern,
                           double tol = 1e-12, int max_sweeps = 10000);

/// Per-group block of s_psi: s_psi = -{mean part, (n_i / 2) vech(M_i)}.
/// `mean` holds the signed mean block; `sym` the matrix -(n_i / 2) M_i.
/// In canonical coordinates the second block is D^T D vech(sym).
struct SufficientBlock {
  Vector mean;
  Matrix sym;

  Vector vech_block() const { return vech(sym); }
};

std::vector<SufficientBlock> expected_s_psi(const ConstrainedFit& fit);

/// True when s_psi vanishes (observed point equals its null expectation).
bool is_degenerate(const ConstrainedFit& fit, double tol = 1e-12);

/// Maximizer of the tilted likelihood at s(t) = (1 - t) s_psi, per group.
struct PathPoint {
  double t = 0.0;
  std::vector<Matrix> cov;  // Lambda_i^{-1}(t)
  std::vector<Vector> mean; // mu_i(t)
};

/// Throws NotPositiveDefinite when t lies outside [0, t_sup).
PathPoint path_estimates(const ConstrainedFit& fit, double t);

/// Covariance part of the path only, without the positive definiteness check.
Matrix path_cov(const ConstrainedFit& fit, int group, double t);

/// y~ = L^T (y - mu0) with Lambda0 = L L^T; under the null y~ ~ N(0, I).
DataMatrix standardize_case5(const DataMatrix& data, const Vector& mu0, const SpdMatrix& lambda0);
SampleSummary standardize_summary(const SampleSummary& s, const Vector& mu0, const SpdMatrix& lambda0);

/// Every group summarized after the existence check n_i >= p + 2.
std::vector<SampleSummary> summarize_groups(const GroupedData& groups);

}  // namespace dirnormal
