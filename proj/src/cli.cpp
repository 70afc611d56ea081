#include "dirnormal/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "dirnormal/errors.hpp"
#include "dirnormal/io.hpp"

namespace dirnormal {

namespace {

nlohmann::ordered_json num(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

nlohmann::ordered_json num(const std::optional<double>& x) { return x ? num(*x) : nlohmann::ordered_json(nullptr); }

struct MethodRow {
  std::string name;
  std::optional<double> statistic;
  double p_value = 1.0;
};

std::vector<MethodRow> method_rows(const TestReport& r) {
  std::vector<MethodRow> rows;
  for (const auto& m : r.methods) {
    MethodRow row{m, std::nullopt, 1.0};
    if (m == "dt") {
      if (r.directional) row.p_value = r.directional->p_value;
    } else if (r.classical) {
      const auto& c = *r.classical;
      if (m == "lrt") {
        row.statistic = c.w;
        row.p_value = c.p_lrt;
      } else if (m == "sko1") {
        row.statistic = c.w_star;
        row.p_value = c.p_star;
      } else if (m == "sko2") {
        row.statistic = c.w_star2;
        row.p_value = c.p_star2;
      } else if (m == "bc" && c.bartlett) {
        row.statistic = c.bartlett->w_bc;
        row.p_value = c.bartlett->p_bc;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<std::pair<std::string, nlohmann::ordered_json>> diagnostic_fields(const DirectionalDiagnostics& d) {
  return {
      {"t_sup", num(d.t_sup)},
      {"t_upper", num(d.t_upper)},
      {"t_hat", num(d.t_hat)},
      {"curvature_at_t_hat", num(d.curvature_at_t_hat)},
      {"t_min", num(d.t_min)},
      {"t_max", num(d.t_max)},
      {"numerator", num(d.numerator)},
      {"denominator", num(d.denominator)},
      {"full_range", d.full_range},
      {"degenerate", d.degenerate},
  };
}

std::string csv_value(const nlohmann::ordered_json& v) {
  if (v.is_null()) return "";
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& n : names) {
    const auto m = parse_method(n);
    if (!m) throw ParseError("unknown method '" + n + "' (expected dt, lrt, bc, sko1, sko2)");
    if (std::find(out.begin(), out.end(), *m) == out.end()) out.push_back(*m);
  }
  if (out.empty()) throw ParseError("no methods requested");
  return out;
}

Case require_case(const std::string& name) {
  const auto c = parse_case(name);
  if (!c) throw ParseError("unknown case '" + name + "' (expected c1..c6 or pattern)");
  return *c;
}

DirectionalOptions directional_options(const RunConfig& cfg) {
  if (!(cfg.interval_width > 0.0)) throw ParseError("--interval-width must be positive");
  if (!(cfg.quad_tol > 0.0)) throw ParseError("--quad-tol must be positive");
  DirectionalOptions o;
  o.width_sigmas = cfg.interval_width;
  o.rel_tol = cfg.quad_tol;
  return o;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot write output file '" + path + "'");
  f << text;
}

}  // namespace

ParseOutcome parse_command_line(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Directional and likelihood-based tests for multivariate normal hypotheses"};
  app.require_subcommand(1);

  std::string format = "json";
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--case", cfg.case_name, "c1|c2|c3|c4|c5|c6|pattern")->required();
    sub->add_option("--methods", cfg.methods, "comma-separated subset of dt,lrt,bc,sko1,sko2")->delimiter(',');
    sub->add_option("--bc-reps", cfg.bc_reps, "bootstrap replications for bc")->check(CLI::PositiveNumber);
    sub->add_option("--seed", cfg.seed, "random seed");
    sub->add_option("--interval-width", cfg.interval_width, "half-width of the integration window in sigmas");
    sub->add_option("--quad-tol", cfg.quad_tol, "relative quadrature tolerance");
  };

  CLI::App* test = app.add_subcommand("test", "test a hypothesis on observed data");
  add_common(test);
  test->add_option("--data", cfg.data_paths, "data CSV; repeat once per group")->required()->take_all();
  test->add_option("--group-col", cfg.group_col, "column holding group labels");
  test->add_option("--blocks", cfg.blocks, "block sizes for c2")->delimiter(',');
  test->add_option("--mu0", cfg.mu0_path, "mean vector for c5");
  test->add_option("--lambda0", cfg.lambda0_path, "concentration matrix for c5");
  test->add_option("--pattern", cfg.pattern_path, "1-based i,j pairs of zero concentrations");
  test->add_option("--out", cfg.out, "output file, '-' for stdout");
  test->add_option("--format", format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
  test->add_flag("--pretty", cfg.pretty, "also print a readable table to stdout");

  CLI::App* sim = app.add_subcommand("simulate", "run a Monte Carlo study");
  add_common(sim);
  sim->add_option("--n", cfg.n, "sample size, or one per group")->delimiter(',')->required();
  sim->add_option("--p", cfg.p, "dimension")->required();
  sim->add_option("--k", cfg.k, "number of groups for c3/c4");
  sim->add_option("--reps", cfg.reps, "replications")->required();
  sim->add_option("--alt", cfg.alternative, "null|setting1|local|extreme")
      ->check(CLI::IsMember({"null", "setting1", "local", "extreme"}));
  sim->add_option("--delta", cfg.delta, "local alternative size");
  sim->add_option("--eta", cfg.eta, "extreme alternative size");
  sim->add_option("--alpha", cfg.alpha, "nominal level");
  sim->add_option("--threads", cfg.threads, "worker threads (default DIRNORMAL_THREADS or all cores)");
  sim->add_option("--out", cfg.out, "output directory")->required();

  bool sim_methods_given = false;
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    ParseOutcome po;
    po.exit_code = app.exit(e, out, err) == 0 ? kExitOk : kExitInputError;
    return po;
  }
  if (test->parsed()) {
    cfg.command = "test";
  } else {
    cfg.command = "simulate";
    sim_methods_given = sim->count("--methods") > 0;
    if (!sim_methods_given) cfg.methods = {"dt", "lrt", "bc", "sko1", "sko2"};
  }
  cfg.format = format == "csv" ? OutputFormat::kCsv : OutputFormat::kJson;
  return ParseOutcome{cfg, kExitOk};
}

TestReport run_test(const HypothesisSpec& spec, const GroupedData& groups, const std::vector<Method>& methods,
                    const DirectionalOptions& dir_options, int bc_reps, std::uint64_t seed,
                    const std::string& case_name) {
  TestReport r;
  r.case_name = case_name;
  for (Method m : methods) r.methods.emplace_back(method_name(m));
  const auto summaries = summarize_groups(groups);
  for (const auto& s : summaries) r.group_sizes.push_back(s.n);
  r.p = summaries.front().p;
  const ConstrainedFit fit = constrained_mle(spec, summaries);
  r.d = fit.d;

  auto has = [&](Method m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };
  if (has(Method::kLRT) || has(Method::kBC) || has(Method::kSko1) || has(Method::kSko2)) {
    ClassicalOptions opts;
    opts.skovgaard = has(Method::kSko1) || has(Method::kSko2);
    if (has(Method::kBC)) opts.bootstrap_reps = bc_reps;
    opts.seed = seed;
    r.classical = classical_tests(spec, fit, opts);
    r.degenerate = r.classical->degenerate;
  }
  if (has(Method::kDT)) {
    r.directional = directional_pvalue(fit, dir_options);
    r.degenerate = r.degenerate || r.directional->degenerate;
  }
  if (r.degenerate) r.note = "observed statistic equals its null expectation; p-values set to 1";
  return r;
}

nlohmann::ordered_json report_to_json(const TestReport& report) {
  nlohmann::ordered_json j;
  j["schema"] = "report-v1";
  j["case"] = report.case_name;
  j["status"] = report.degenerate ? "degenerate" : "ok";
  j["n"] = std::accumulate(report.group_sizes.begin(), report.group_sizes.end(), 0);
  j["group_sizes"] = report.group_sizes;
  j["p"] = report.p;
  j["d"] = report.d;
  for (const auto& row : method_rows(report)) {
    nlohmann::ordered_json m;
    m["statistic"] = num(row.statistic);
    m["p_value"] = num(row.p_value);
    if (row.name == "bc" && report.classical && report.classical->bartlett) {
      m["e_w_hat"] = num(report.classical->bartlett->e_w_hat);
    }
    j[row.name] = m;
  }
  if (report.classical) {
    const auto& c = *report.classical;
    nlohmann::ordered_json cj;
    cj["w"] = num(c.w);
    cj["w_mle"] = num(c.w_mle);
    cj["log_gamma"] = num(c.log_gamma);
    cj["gamma"] = num(c.gamma);
    j["classical"] = cj;
  }
  if (report.directional) {
    nlohmann::ordered_json dj;
    for (auto& [k, v] : diagnostic_fields(*report.directional)) dj[k] = v;
    j["diagnostics"] = dj;
  }
  if (!report.note.empty()) j["note"] = report.note;
  return j;
}

std::string report_to_csv(const TestReport& report) {
  std::ostringstream os;
  os << "section,name,value\n";
  os << "meta,schema,report-v1\n";
  os << "meta,case," << report.case_name << '\n';
  os << "meta,status," << (report.degenerate ? "degenerate" : "ok") << '\n';
  os << "meta,n," << std::accumulate(report.group_sizes.begin(), report.group_sizes.end(), 0) << '\n';
  os << "meta,p," << report.p << '\n';
  os << "meta,d," << report.d << '\n';
  for (const auto& row : method_rows(report)) {
    os << row.name << ",statistic," << (row.statistic ? format_double(*row.statistic) : "") << '\n';
    os << row.name << ",p_value," << format_double(row.p_value) << '\n';
  }
  if (report.classical) {
    const auto& c = *report.classical;
    os << "classical,w," << format_double(c.w) << '\n';
    os << "classical,w_mle," << format_double(c.w_mle) << '\n';
    if (c.log_gamma) os << "classical,log_gamma," << format_double(*c.log_gamma) << '\n';
  }
  if (report.directional) {
    for (auto& [k, v] : diagnostic_fields(*report.directional)) os << "diagnostics," << k << ',' << csv_value(v) << '\n';
  }
  return os.str();
}

std::string report_to_pretty(const TestReport& report) {
  std::ostringstream os;
  os << "case " << report.case_name << "  p=" << report.p << "  d=" << report.d << "  n=";
  for (std::size_t i = 0; i < report.group_sizes.size(); ++i) os << (i ? "," : "") << report.group_sizes[i];
  os << (report.degenerate ? "  (degenerate)" : "") << "\n\n";
  os << std::left << std::setw(8) << "method" << std::right << std::setw(16) << "statistic" << std::setw(14)
     << "p-value" << '\n';
  for (const auto& row : method_rows(report)) {
    os << std::left << std::setw(8) << row.name << std::right << std::setw(16);
    if (row.statistic) {
      os << std::setprecision(6) << *row.statistic;
    } else {
      os << "-";
    }
    os << std::setw(14) << std::setprecision(4) << row.p_value << '\n';
  }
  if (report.directional && !report.directional->degenerate) {
    const auto& d = *report.directional;
    os << std::setprecision(6) << "\nt_hat=" << d.t_hat << "  window=[" << d.t_min << ", " << d.t_max
       << "]  t_sup=" << d.t_sup << '\n';
  }
  return os.str();
}

std::string study_summary_csv(const StudyResult& result) {
  std::ostringstream os;
  os << "method,metric,value\n";
  os << "study,d," << result.d << '\n';
  os << "study,reps," << result.spec.reps << '\n';
  os << "study,null_failures," << result.null_failures << '\n';
  os << "study,alt_failures," << result.alt_failures << '\n';
  if (result.e_w_hat) os << "study,e_w_hat," << format_double(*result.e_w_hat) << '\n';
  for (const auto& s : result.methods) {
    const std::string m(method_name(s.method));
    os << m << ",replications," << s.null_pvalues.size() << '\n';
    os << m << ",estimated_type1," << format_double(s.estimated_type1) << '\n';
    os << m << ",corrected_cutoff," << format_double(s.corrected_cutoff) << '\n';
    os << m << ",corrected_type1," << format_double(s.corrected_type1) << '\n';
    if (s.power) os << m << ",power," << format_double(*s.power) << '\n';
    if (s.corrected_power) os << m << ",corrected_power," << format_double(*s.corrected_power) << '\n';
    os << m << ",ks_statistic," << format_double(s.ks.statistic) << '\n';
    os << m << ",ks_pvalue," << format_double(s.ks.p_value) << '\n';
  }
  return os.str();
}

std::string ecdf_csv(std::vector<double> pvalues) {
  std::sort(pvalues.begin(), pvalues.end());
  std::ostringstream os;
  os << "p_value,empirical_cdf\n";
  const double r = static_cast<double>(pvalues.size());
  for (std::size_t i = 0; i < pvalues.size(); ++i) {
    os << format_double(pvalues[i]) << ',' << format_double((i + 1) / r) << '\n';
  }
  return os.str();
}

namespace {

HypothesisSpec build_hypothesis(const RunConfig& cfg, Case kind, const GroupedData& groups) {
  const int p = groups.front().p();
  switch (kind) {
    case Case::kProportionalIdentity: return HypothesisSpec::proportional_identity();
    case Case::kBlockIndependence:
      if (cfg.blocks.empty()) throw ParseError("c2 needs --blocks p1,p2,...");
      return HypothesisSpec::block_independence(cfg.blocks);
    case Case::kEqualDistributions: return HypothesisSpec::equal_distributions();
    case Case::kEqualCovariances: return HypothesisSpec::equal_covariances();
    case Case::kSpecifiedMeanCov:
      if (!cfg.mu0_path || !cfg.lambda0_path) throw ParseError("c5 needs --mu0 FILE and --lambda0 FILE");
      return HypothesisSpec::specified(read_vector_csv(*cfg.mu0_path), read_spd_csv(*cfg.lambda0_path));
    case Case::kCompleteIndependence: return HypothesisSpec::complete_independence();
    case Case::kZeroPattern: {
      if (!cfg.pattern_path) throw ParseError("pattern needs --pattern FILE");
      const auto pairs = read_edge_list(*cfg.pattern_path);
      return HypothesisSpec::zero_pattern(ZeroPattern::from_zero_pairs(p, pairs));
    }
  }
  throw ParseError("unsupported case");
}

}  // namespace

int run_test_command(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  // Failures that happen after the input has been accepted still leave a
  // report behind, flagged as degenerate.
  auto degenerate_report = [&](const std::string& what) {
    TestReport r;
    r.case_name = cfg.case_name;
    r.degenerate = true;
    r.note = what;
    const std::string text = cfg.format == OutputFormat::kCsv ? report_to_csv(r) : report_to_json(r).dump(2) + "\n";
    try {
      write_text(cfg.out, text, out);
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
    }
    err << "degenerate: " << what << '\n';
    return kExitDegenerate;
  };
  try {
    const Case kind = require_case(cfg.case_name);
    const auto methods = parse_methods(cfg.methods);
    const DirectionalOptions dir = directional_options(cfg);
    GroupedData groups;
    if (cfg.group_col) {
      if (cfg.data_paths.size() != 1) throw ParseError("--group-col takes exactly one --data file");
      groups = read_grouped_csv(cfg.data_paths.front(), *cfg.group_col);
    } else {
      for (const auto& path : cfg.data_paths) groups.push_back(read_data_csv(path));
    }
    if (groups.empty()) throw ParseError("no data supplied");
    const HypothesisSpec spec = build_hypothesis(cfg, kind, groups);
    TestReport report;
    try {
      report = run_test(spec, groups, methods, dir, cfg.bc_reps, cfg.seed, cfg.case_name);
    } catch (const DegenerateNull& e) {
      return degenerate_report(e.what());
    } catch (const NotPositiveDefinite& e) {
      return degenerate_report(e.what());
    } catch (const NoConvergence& e) {
      return degenerate_report(std::string("numerical failure: ") + e.what());
    }
    const std::string text = cfg.format == OutputFormat::kCsv ? report_to_csv(report)
                                                              : report_to_json(report).dump(2) + "\n";
    write_text(cfg.out, text, out);
    if (cfg.pretty) out << report_to_pretty(report);
    if (report.degenerate) {
      err << "degenerate: " << report.note << '\n';
      return kExitDegenerate;
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
}

int run_simulate_command(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    ScenarioSpec spec;
    spec.kind = require_case(cfg.case_name);
    spec.n = cfg.n;
    spec.p = cfg.p;
    spec.k = cfg.k;
    const auto alt = parse_alternative(cfg.alternative);
    if (!alt) throw ParseError("unknown alternative '" + cfg.alternative + "'");
    spec.alternative = *alt;
    spec.delta = cfg.delta;
    spec.eta = cfg.eta;
    spec.reps = cfg.reps;
    spec.seed = cfg.seed;
    spec.methods = parse_methods(cfg.methods);
    spec.bootstrap_reps = cfg.bc_reps;
    spec.alpha = cfg.alpha;
    spec.threads = cfg.threads;
    spec.directional = directional_options(cfg);

    const StudyResult result = run_study(spec);
    std::filesystem::create_directories(cfg.out);
    const std::filesystem::path dir(cfg.out);
    write_text((dir / "summary.csv").string(), study_summary_csv(result), out);
    for (const auto& s : result.methods) {
      const std::string m(method_name(s.method));
      write_text((dir / ("ecdf_" + m + ".csv")).string(), ecdf_csv(s.null_pvalues), out);
      if (spec.alternative != Alternative::kNull) {
        write_text((dir / ("ecdf_alt_" + m + ".csv")).string(), ecdf_csv(s.alt_pvalues), out);
      }
    }
    err << "simulate: " << result.spec.reps << " replications in " << std::fixed << std::setprecision(2)
        << result.wall_seconds << " s";
    if (result.null_failures + result.alt_failures > 0) {
      err << ", " << result.null_failures + result.alt_failures << " failed";
    }
    err << '\n';
    return kExitOk;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  const ParseOutcome po = parse_command_line(argc, argv, out, err);
  if (!po.config) return po.exit_code;
  if (po.config->command == "test") return run_test_command(*po.config, out, err);
  return run_simulate_command(*po.config, out, err);
}

}  // namespace dirnormal
