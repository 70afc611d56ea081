#include "dirnormal/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <string>
#include <thread>

#include "dirnormal/classical.hpp"
#include "dirnormal/errors.hpp"

namespace dirnormal {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int half_up(int p) { return (p + 1) / 2; }

Matrix banded(int p, double off) {
  Matrix m = Matrix::Identity(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      if (i != j && std::abs(i - j) <= 3) m(i, j) = off;
    }
  }
  return m;
}

Matrix compound(int p, double all, double diag) {
  return Matrix::Constant(p, p, all) + diag * Matrix::Identity(p, p);
}

Vector leading(int p, int count, double value) {
  Vector v = Vector::Zero(p);
  v.head(std::min(count, p)).setConstant(value);
  return v;
}

SpdMatrix checked(const Matrix& m, const std::string& what) {
  try {
    return SpdMatrix(m);
  } catch (const NotPositiveDefinite&) {
    throw InvalidScenario(what + " covariance is not positive definite for these parameters");
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidScenario(message);
}

template <typename Fn>
void parallel_for(int count, unsigned threads, Fn&& fn) {
  const unsigned workers = std::min<unsigned>(std::max(1u, threads), std::max(1, count));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kDT: return "dt";
    case Method::kLRT: return "lrt";
    case Method::kBC: return "bc";
    case Method::kSko1: return "sko1";
    case Method::kSko2: return "sko2";
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
  for (Method m : kAllMethods) {
    if (method_name(m) == name) return m;
  }
  return std::nullopt;
}

std::string_view alternative_name(Alternative a) {
  switch (a) {
    case Alternative::kNull: return "null";
    case Alternative::kSetting1: return "setting1";
    case Alternative::kLocal: return "local";
    case Alternative::kExtreme: return "extreme";
  }
  return "unknown";
}

std::optional<Alternative> parse_alternative(std::string_view name) {
  for (Alternative a : {Alternative::kNull, Alternative::kSetting1, Alternative::kLocal, Alternative::kExtreme}) {
    if (alternative_name(a) == name) return a;
  }
  return std::nullopt;
}

int ScenarioSpec::groups() const {
  return kind == Case::kEqualDistributions || kind == Case::kEqualCovariances ? k : 1;
}

int ScenarioSpec::group_size(int i) const { return n.size() == 1 ? n.front() : n.at(i); }

bool ScenarioSpec::wants(Method m) const {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

std::vector<int> case2_blocks(int p) {
  if (p < 3) throw InvalidScenario("the three-block design needs p >= 3");
  const int p1 = std::max(1, static_cast<int>(std::lround(0.4 * p)));
  const int p2 = p1;
  const int p3 = p - p1 - p2;
  if (p3 < 1) return {p1, p - p1 - 1, 1};
  return {p1, p2, p3};
}

HypothesisSpec scenario_hypothesis(const ScenarioSpec& spec) {
  switch (spec.kind) {
    case Case::kProportionalIdentity: return HypothesisSpec::proportional_identity();
    case Case::kBlockIndependence: return HypothesisSpec::block_independence(case2_blocks(spec.p));
    case Case::kEqualDistributions: return HypothesisSpec::equal_distributions();
    case Case::kEqualCovariances: return HypothesisSpec::equal_covariances();
    case Case::kSpecifiedMeanCov:
      return HypothesisSpec::specified(Vector::Zero(spec.p), SpdMatrix::identity(spec.p));
    case Case::kCompleteIndependence: return HypothesisSpec::complete_independence();
    case Case::kZeroPattern: break;
  }
  throw InvalidScenario("zero-pattern hypotheses have no simulation design");
}

std::vector<GroupModel> scenario_model(const ScenarioSpec& spec, Alternative alternative) {
  const int p = spec.p;
  const int g = spec.groups();
  const double n1 = spec.group_size(0);
  const double delta = spec.delta;
  const double eta = spec.eta;
  const Matrix eye = Matrix::Identity(p, p);
  const Vector zero = Vector::Zero(p);
  std::vector<GroupModel> out;

  if (alternative == Alternative::kNull) {
    for (int i = 0; i < g; ++i) out.push_back({zero, SpdMatrix(eye)});
    return out;
  }
  const std::string name(case_name(spec.kind));
  switch (spec.kind) {
    case Case::kProportionalIdentity: {
      Vector diag = Vector::Ones(p);
      if (alternative == Alternative::kSetting1) {
        diag.head(half_up(p)).setConstant(1.69);
      } else if (alternative == Alternative::kLocal) {
        require(delta >= 0.0, "c1 local alternative needs delta >= 0");
        diag.head(half_up(p)).array() += delta / std::sqrt(n1) * std::sqrt(2.0 / p);
      } else {
        require(eta >= 0.0, "c1 extreme alternative needs eta >= 0");
        diag.head(p - 1).setConstant(1.0 + eta);
      }
      out.push_back({zero, checked(diag.asDiagonal().toDenseMatrix(), name)});
      break;
    }
    case Case::kBlockIndependence: {
      const auto blocks = case2_blocks(p);
      Matrix cov;
      if (alternative == Alternative::kSetting1) {
        cov = compound(p, 0.15, 0.85);
      } else if (alternative == Alternative::kLocal) {
        const double e = delta / std::sqrt(p * (p - 1.0) * n1);
        require(e > 0.0 && e < 1.0, "c2 local alternative needs eta = delta / sqrt(p(p-1)n) in (0, 1)");
        cov = compound(p, e, 1.0 - e);
      } else {
        require(eta > 0.0 && eta < 1.0, "c2 extreme alternative needs eta in (0, 1)");
        cov = eye;
        cov(0, blocks[0]) = cov(blocks[0], 0) = eta;
      }
      out.push_back({zero, checked(cov, name)});
      break;
    }
    case Case::kEqualDistributions:
    case Case::kEqualCovariances: {
      const bool means = spec.kind == Case::kEqualDistributions;
      const double scale = std::sqrt(p * n1);
      if (alternative == Alternative::kSetting1) {
        require(g == 3, name + " setting 1 is defined for k = 3 groups");
        if (means) {
          out.push_back({zero, checked(compound(p, 0.5, 0.5), name)});
          out.push_back({Vector::Constant(p, 0.1), checked(compound(p, 0.6, 0.4), name)});
          out.push_back({Vector::Constant(p, 0.1), checked(compound(p, 0.5, 0.31), name)});
        } else {
          out.push_back({zero, SpdMatrix(eye)});
          out.push_back({zero, SpdMatrix(1.21 * eye)});
          out.push_back({zero, SpdMatrix(0.81 * eye)});
        }
        break;
      }
      out.push_back({zero, SpdMatrix(eye)});
      Vector mean = zero;
      Matrix cov;
      if (alternative == Alternative::kLocal) {
        if (means) mean.setConstant(delta / scale);
        cov = (1.0 + delta / scale) * eye;
      } else {
        // The equal-covariance extreme design reuses this one verbatim.
        require(eta > 0.0, name + " extreme alternative needs eta > 0");
        mean(0) = 10.0 / scale;
        cov = eye;
        cov(0, 0) = eta;
      }
      const SpdMatrix c = checked(cov, name);
      for (int i = 1; i < g; ++i) out.push_back({mean, c});
      break;
    }
    case Case::kSpecifiedMeanCov:
    case Case::kCompleteIndependence: {
      const bool means = spec.kind == Case::kSpecifiedMeanCov;
      Vector mean = zero;
      Matrix cov;
      if (alternative == Alternative::kSetting1) {
        if (means) mean = leading(p, half_up(p), 0.1);
        cov = banded(p, 0.1);
      } else if (alternative == Alternative::kLocal) {
        if (means) mean = leading(p, half_up(p), delta * std::sqrt(2.0 / (p * n1)));
        int pairs = 0;
        for (int k = 1; k <= 3; ++k) pairs += 2 * std::max(0, p - k);
        const double u = pairs > 0 ? 1.0 / std::sqrt(static_cast<double>(pairs)) : 0.0;
        cov = banded(p, delta * u / std::sqrt(n1));
      } else if (means) {
        require(eta > 0.0 && eta < 1.0, "c5 extreme alternative needs eta in (0, 1)");
        mean = leading(p, half_up(p), 0.1);
        cov = eye;
        cov(0, 0) = 1.0 - eta;
      } else {
        require(eta > 0.0 && eta < 1.0, "c6 extreme alternative needs eta in (0, 1)");
        cov = eye;
        cov(0, 1) = cov(1, 0) = eta;
      }
      out.push_back({mean, checked(cov, name)});
      break;
    }
    case Case::kZeroPattern:
      throw InvalidScenario("zero-pattern hypotheses have no simulation design");
  }
  return out;
}

void validate_scenario(const ScenarioSpec& spec) {
  require(spec.reps >= 1, "reps must be at least 1");
  require(spec.alpha > 0.0 && spec.alpha < 1.0, "alpha must lie in (0, 1)");
  require(spec.p >= 1, "p must be positive");
  require(!spec.methods.empty(), "no methods requested");
  const int g = spec.groups();
  require(spec.n.size() == 1 || static_cast<int>(spec.n.size()) == g,
          "give one sample size or one per group (" + std::to_string(g) + ")");
  for (int i = 0; i < g; ++i) {
    require(spec.group_size(i) >= spec.p + 2,
            "need n >= p + 2 per group (n=" + std::to_string(spec.group_size(i)) + ", p=" + std::to_string(spec.p) + ")");
  }
  if (spec.wants(Method::kBC)) require(spec.bootstrap_reps >= 50, "bootstrap needs at least 50 replications");
  try {
    scenario_hypothesis(spec).validate(spec.p, g);
  } catch (const DimensionError& e) {
    throw InvalidScenario(e.what());
  }
  scenario_model(spec, spec.alternative);
}

GroupedData generate_scenario(const ScenarioSpec& spec, int rep_index, Phase phase) {
  const auto model = scenario_model(spec, phase == Phase::kAlternative ? spec.alternative : Alternative::kNull);
  Engine rng = make_engine(StreamKey{spec.seed, static_cast<std::uint64_t>(spec.kind),
                                     static_cast<std::uint64_t>(rep_index), static_cast<std::uint64_t>(phase)});
  GroupedData data;
  for (int i = 0; i < static_cast<int>(model.size()); ++i) {
    data.push_back(sample_mvn(model[i].mean, model[i].cov, spec.group_size(i), rng));
  }
  return data;
}

double corrected_cutoff(std::vector<double> null_pvalues, double alpha) {
  if (null_pvalues.empty()) throw InvalidScenario("no null p-values to calibrate on");
  std::sort(null_pvalues.begin(), null_pvalues.end());
  const auto r = static_cast<double>(null_pvalues.size());
  const int idx = std::max(1, static_cast<int>(std::ceil(alpha * r - 1e-9)));
  return null_pvalues[std::min<std::size_t>(idx, null_pvalues.size()) - 1];
}

double corrected_rate(const std::vector<double>& pvalues, const std::vector<double>& null_pvalues,
                      double alpha) {
  if (pvalues.empty()) return kNaN;
  const double c = corrected_cutoff(null_pvalues, alpha);
  const auto allowed = static_cast<std::size_t>(
      std::max(1.0, std::ceil(alpha * static_cast<double>(null_pvalues.size()) - 1e-9)));
  const auto at_or_below = static_cast<std::size_t>(
      std::count_if(null_pvalues.begin(), null_pvalues.end(), [c](double x) { return x <= c; }));
  const bool ties_reject = at_or_below <= allowed;
  const auto hits = std::count_if(pvalues.begin(), pvalues.end(),
                                  [&](double x) { return x < c || (ties_reject && x == c); });
  return static_cast<double>(hits) / static_cast<double>(pvalues.size());
}

double kolmogorov_upper_tail(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // Jacobi theta form, fast for small arguments.
    const double a = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double s = 0.0;
    for (int k = 1; k <= 20; ++k) s += std::exp(-(2.0 * k - 1.0) * (2.0 * k - 1.0) * a);
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_uniformity(std::vector<double> pvalues) {
  if (pvalues.empty()) throw InvalidScenario("KS test needs at least one value");
  std::sort(pvalues.begin(), pvalues.end());
  const double r = static_cast<double>(pvalues.size());
  double d = 0.0;
  for (std::size_t i = 0; i < pvalues.size(); ++i) {
    const double x = std::clamp(pvalues[i], 0.0, 1.0);
    d = std::max({d, (i + 1) / r - x, x - i / r});
  }
  const double root = std::sqrt(r);
  return KsResult{d, kolmogorov_upper_tail((root + 0.12 + 0.11 / root) * d)};
}

RepRecord run_replication(const ScenarioSpec& spec, const HypothesisSpec& hyp, const GroupedData& data,
                          std::optional<double> e_w_hat) {
  RepRecord rec;
  rec.pvalues.fill(kNaN);
  try {
    const auto summaries = summarize_groups(data);
    const ConstrainedFit fit = constrained_mle(hyp, summaries);
    const bool classical = spec.wants(Method::kLRT) || spec.wants(Method::kBC) ||
                           spec.wants(Method::kSko1) || spec.wants(Method::kSko2);
    if (classical) {
      ClassicalOptions opts;
      opts.skovgaard = spec.wants(Method::kSko1) || spec.wants(Method::kSko2);
      if (spec.wants(Method::kBC)) opts.e_w_hat = e_w_hat;
      const ClassicalReport cr = classical_tests(hyp, fit, opts);
      auto set = [&](Method m, double v) {
        if (spec.wants(m)) rec.pvalues[static_cast<int>(m)] = v;
      };
      set(Method::kLRT, cr.p_lrt);
      set(Method::kSko1, cr.p_star);
      set(Method::kSko2, cr.p_star2);
      if (cr.bartlett) set(Method::kBC, cr.bartlett->p_bc);
    }
    if (spec.wants(Method::kDT)) {
      rec.pvalues[static_cast<int>(Method::kDT)] = directional_pvalue(fit, spec.directional).p_value;
    }
  } catch (const Error& e) {
    rec.failed = true;
    rec.error = e.what();
    rec.pvalues.fill(kNaN);
  }
  return rec;
}

unsigned worker_count(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DIRNORMAL_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<RepRecord> run_replications(const ScenarioSpec& spec, Phase phase, int reps,
                                        std::optional<double> e_w_hat, int first_rep) {
  const HypothesisSpec hyp = scenario_hypothesis(spec);
  std::vector<RepRecord> records(reps);
  parallel_for(reps, worker_count(spec.threads), [&](int i) {
    records[i] = run_replication(spec, hyp, generate_scenario(spec, first_rep + i, phase), e_w_hat);
  });
  return records;
}

double calibrate_expected_w(const ScenarioSpec& spec) {
  const HypothesisSpec hyp = scenario_hypothesis(spec);
  const int b = spec.bootstrap_reps;
  std::vector<double> w(b, kNaN);
  parallel_for(b, worker_count(spec.threads), [&](int i) {
    try {
      const auto summaries = summarize_groups(generate_scenario(spec, i, Phase::kCalibration));
      w[i] = lrt(constrained_mle(hyp, summaries));
    } catch (const Error&) {
      w[i] = kNaN;
    }
  });
  double total = 0.0;
  int count = 0;
  for (double x : w) {
    if (std::isfinite(x)) {
      total += x;
      ++count;
    }
  }
  if (count == 0 || !(total > 0.0)) throw DegenerateNull("calibration of E(W) failed");
  return total / count;
}

const MethodSummary& StudyResult::summary(Method m) const {
  for (const auto& s : methods) {
    if (s.method == m) return s;
  }
  throw InvalidScenario("method " + std::string(method_name(m)) + " was not part of the study");
}

StudyResult run_study(const ScenarioSpec& spec) {
  const auto start = std::chrono::steady_clock::now();
  validate_scenario(spec);
  StudyResult result;
  result.spec = spec;
  result.d = degrees_of_freedom(scenario_hypothesis(spec), spec.p, spec.groups());
  if (spec.wants(Method::kBC)) result.e_w_hat = calibrate_expected_w(spec);

  const auto null_recs = run_replications(spec, Phase::kNull, spec.reps, result.e_w_hat);
  std::vector<RepRecord> alt_recs;
  const bool has_alt = spec.alternative != Alternative::kNull;
  if (has_alt) alt_recs = run_replications(spec, Phase::kAlternative, spec.reps, result.e_w_hat);

  auto tally = [&](const std::vector<RepRecord>& recs, int& failures) {
    for (const auto& r : recs) {
      if (!r.failed) continue;
      ++failures;
      if (result.failure_messages.size() < 10) result.failure_messages.push_back(r.error);
    }
  };
  tally(null_recs, result.null_failures);
  tally(alt_recs, result.alt_failures);

  for (Method m : spec.methods) {
    MethodSummary s;
    s.method = m;
    const int idx = static_cast<int>(m);
    for (const auto& r : null_recs) {
      if (std::isfinite(r.pvalues[idx])) s.null_pvalues.push_back(r.pvalues[idx]);
    }
    for (const auto& r : alt_recs) {
      if (std::isfinite(r.pvalues[idx])) s.alt_pvalues.push_back(r.pvalues[idx]);
    }
    if (!s.null_pvalues.empty()) {
      const double r = static_cast<double>(s.null_pvalues.size());
      s.estimated_type1 =
          std::count_if(s.null_pvalues.begin(), s.null_pvalues.end(), [&](double x) { return x < spec.alpha; }) / r;
      s.corrected_cutoff = corrected_cutoff(s.null_pvalues, spec.alpha);
      s.corrected_type1 = corrected_rate(s.null_pvalues, s.null_pvalues, spec.alpha);
      s.ks = ks_uniformity(s.null_pvalues);
      if (has_alt && !s.alt_pvalues.empty()) {
        const double ra = static_cast<double>(s.alt_pvalues.size());
        s.power =
            std::count_if(s.alt_pvalues.begin(), s.alt_pvalues.end(), [&](double x) { return x < spec.alpha; }) / ra;
        s.corrected_power = corrected_rate(s.alt_pvalues, s.null_pvalues, spec.alpha);
      }
    }
    result.methods.push_back(std::move(s));
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace dirnormal
