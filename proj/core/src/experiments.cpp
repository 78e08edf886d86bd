#include "mfgfem/experiments.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

namespace mfgfem {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::exception_ptr first;
  std::vector<std::thread> pool;
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mutex);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

SolverConfig effective_solver(const ExperimentConfig& config, const RunOptions& options) {
  SolverConfig s = config.solver;
  s.fallback = s.fallback || options.fallback;
  s.fallback_c = config.lambda_c;
  s.fallback_gamma = config.gamma;
  return s;
}

/// Nested spaces for levels 0..max_level sharing one refinement chain.
std::vector<SpacePtr> build_hierarchy(DomainTag domain, int max_level) {
  std::vector<SpacePtr> spaces;
  MeshPtr mesh = build_level(domain, 0);
  for (int k = 0; k <= max_level; ++k) {
    if (k > 0) mesh = refine_uniform(mesh);
    spaces.push_back(std::make_shared<P1Space>(mesh));
  }
  return spaces;
}

double mesh_size(const SpacePtr& space) { return metrics(space->mesh()).h_max; }

double checked_lambda(double lambda, int level) {
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw ConfigError("lambda = " + std::to_string(lambda) + " at level " + std::to_string(level) +
                      " is outside (0, 1]");
  }
  return lambda;
}

struct Attempt {
  MfgProblem problem;
  std::optional<MfgSolution> solution;
  std::string error;
  double seconds = 0.0;
};

Attempt attempt_solve(const ExperimentConfig& config, const SpacePtr& space, std::optional<double> lambda,
                      const SolverConfig& solver, const WarmStart* warm = nullptr) {
  Attempt a;
  a.problem = config.make_problem(space, lambda);
  const auto start = Clock::now();
  try {
    a.solution = solve_mfg(a.problem, solver, warm);
  } catch (const NonConvergence& e) {
    a.error = e.what();
  } catch (const DmpViolation& e) {
    a.error = e.what();
  } catch (const LinearSolveError& e) {
    a.error = e.what();
  } catch (const QpNonConvergence& e) {
    a.error = e.what();
  }
  a.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  if (!a.error.empty()) {
    spdlog::warn("solve on level {} failed: {}", space->mesh().level(), a.error);
  }
  return a;
}

class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::optional<double> solution_lambda(const Attempt& a) {
  return a.solution ? a.solution->telemetry.lambda : a.problem.lambda;
}

WarmStart prolonged_warm_start(const MfgSolution& coarse, const SpacePtr& fine) {
  const P1Space& cs = *coarse.u.space;
  return WarmStart{prolong_field(cs, *fine, coarse.u.values), prolong_field(cs, *fine, coarse.m.values)};
}

/// Reference solve on the finest space; the unregularized path is tried first in
/// Auto mode.
Attempt compute_reference(const ExperimentConfig& config, const SolverConfig& solver,
                          const SpacePtr& space, const WarmStart* warm, std::vector<std::string>& notes) {
  const double h = mesh_size(space);
  const int level = space->mesh().level();
  if (config.reference_mode != ReferenceMode::Regularized) {
    SolverConfig strict = solver;
    strict.fallback = false;
    Attempt pdi = attempt_solve(config, space, std::nullopt, strict, warm);
    if (pdi.solution) return pdi;
    if (config.reference_mode == ReferenceMode::Pdi) {
      throw SolverFailure("reference solve on level " + std::to_string(level) + " failed: " + pdi.error);
    }
    notes.push_back("unregularized reference failed (" + pdi.error + "); using the regularized reference");
  }
  const double lambda = config.schedule == LambdaSchedule::Fixed ? config.lambda
                                                                 : checked_lambda(config.coupled_lambda(h), level);
  Attempt reg = attempt_solve(config, space, lambda, solver, warm);
  if (!reg.solution) {
    throw SolverFailure("reference solve on level " + std::to_string(level) + " failed: " + reg.error);
  }
  return reg;
}

ReferenceInfo reference_info(const Attempt& ref) {
  ReferenceInfo info;
  info.level = ref.problem.space->mesh().level();
  info.lambda = solution_lambda(ref);
  info.residuals = residuals(ref.problem, *ref.solution);
  info.outer_iters = ref.solution->telemetry.outer_iterations;
  return info;
}

LevelRow make_row(const Attempt& a, const std::optional<MfgSolution>& ref) {
  LevelRow row;
  row.level = a.problem.space->mesh().level();
  row.h = mesh_size(a.problem.space);
  row.lambda = solution_lambda(a);
  row.seconds = a.seconds;
  if (!a.solution) {
    row.error = a.error;
    row.err_u_h1 = row.err_m_l2 = row.r1_dual = row.r2_dual = kNaN;
    return row;
  }
  const MfgSolution& s = *a.solution;
  const ResidualReport res = residuals(a.problem, s);
  row.r1_dual = res.r1_dual;
  row.r2_dual = res.r2_dual;
  row.outer_iters = s.telemetry.outer_iterations;
  if (ref) {
    if (ref->u.space == s.u.space) {
      row.err_u_h1 = h1_norm(*s.u.space, s.u.values - ref->u.values);
      row.err_m_l2 = l2_norm(*s.m.space, s.m.values - ref->m.values);
    } else {
      row.err_u_h1 = error_between(s.u, ref->u).h1;
      row.err_m_l2 = error_between(s.m, ref->m).l2;
    }
  }
  return row;
}

/// Fit over the rows whose values are positive; fewer than two leave no fit.
void add_fit(StudyResult& result, const std::string& name, const std::vector<std::pair<double, double>>& pairs) {
  std::vector<std::pair<double, double>> usable;
  for (const auto& [x, y] : pairs) {
    if (x > 0.0 && y > 0.0 && std::isfinite(y)) usable.emplace_back(x, y);
  }
  if (usable.size() < 2) {
    result.notes.push_back("no fit for " + name + " (" + std::to_string(usable.size()) + " usable points)");
    return;
  }
  result.fits.emplace_back(name, fit_rate(usable));
}

void require_single_level(const ExperimentConfig& config, const char* what) {
  if (config.level_min != config.level_max) {
    throw ConfigError(std::string(what) + " needs a single level ('level = k')");
  }
}

}  // namespace

SolveReport run_solve(const ExperimentConfig& config, const RunOptions& options) {
  require_single_level(config, "solve");
  const SpacePtr space = std::make_shared<P1Space>(build_level(config.domain, config.level_min));
  const double h = mesh_size(space);
  std::optional<double> lambda = config.lambda_for(h);
  if (lambda) checked_lambda(*lambda, config.level_min);
  SolveReport r;
  r.problem = config.make_problem(space, lambda);
  r.h = h;
  const auto start = Clock::now();
  r.solution = solve_mfg(r.problem, effective_solver(config, options));
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  r.residuals = residuals(r.problem, r.solution);
  r.nonnegativity = nonnegativity_report(r.solution.m.values);
  return r;
}

StudyResult study_lambda(const ExperimentConfig& config, const RunOptions& options) {
  require_single_level(config, "study-lambda");
  if (config.lambda_list.empty()) throw ConfigError("study-lambda needs lambda.list");
  const SolverConfig solver = effective_solver(config, options);
  const SpacePtr space = std::make_shared<P1Space>(build_level(config.domain, config.level_min));
  StudyResult result;

  std::vector<Attempt> attempts(config.lambda_list.size());
  parallel_for(attempts.size(), options.threads, [&](std::size_t i) {
    attempts[i] = attempt_solve(config, space, config.lambda_list[i], solver);
  });

  SolverConfig strict = solver;
  strict.fallback = false;
  Attempt ref = attempt_solve(config, space, std::nullopt, strict);
  if (!ref.solution) {
    std::size_t finest = 0;
    for (std::size_t i = 1; i < attempts.size(); ++i) {
      if (config.lambda_list[i] < config.lambda_list[finest]) finest = i;
    }
    if (!attempts[finest].solution) throw SolverFailure("study-lambda: no usable reference solution");
    result.notes.push_back("unregularized solve failed (" + ref.error + "); lambda = " +
                           std::to_string(config.lambda_list[finest]) + " substitutes as reference");
    spdlog::warn("{}", result.notes.back());
    ref = attempts[finest];
  }
  result.reference = reference_info(ref);

  std::vector<std::pair<double, double>> m_pairs, u_pairs;
  for (const Attempt& a : attempts) {
    result.rows.push_back(make_row(a, ref.solution));
    const LevelRow& row = result.rows.back();
    if (row.ok()) {
      m_pairs.emplace_back(*row.lambda, row.err_m_l2);
      u_pairs.emplace_back(*row.lambda, row.err_u_h1);
    }
  }
  add_fit(result, "err_m_l2_vs_lambda", m_pairs);
  add_fit(result, "err_u_h1_vs_lambda", u_pairs);
  return result;
}

StudyResult study_h(const ExperimentConfig& config, const RunOptions& options) {
  const SolverConfig solver = effective_solver(config, options);
  const int ref_level = config.level_max + config.finer_levels;
  const std::vector<SpacePtr> spaces = build_hierarchy(config.domain, ref_level);
  StudyResult result;

  const int n_levels = config.level_max - config.level_min + 1;
  std::vector<Attempt> attempts(static_cast<std::size_t>(n_levels));
  std::vector<std::optional<double>> lambdas;
  for (int k = config.level_min; k <= config.level_max; ++k) {
    const auto lam = config.lambda_for(mesh_size(spaces[k]));
    if (lam) checked_lambda(*lam, k);
    lambdas.push_back(lam);
  }
  parallel_for(attempts.size(), options.threads, [&](std::size_t i) {
    attempts[i] = attempt_solve(config, spaces[config.level_min + static_cast<int>(i)], lambdas[i], solver);
  });

  std::optional<WarmStart> warm;
  if (attempts.back().solution) warm = prolonged_warm_start(*attempts.back().solution, spaces[ref_level]);
  const Attempt ref = compute_reference(config, solver, spaces[ref_level], warm ? &*warm : nullptr, result.notes);
  result.reference = reference_info(ref);

  std::vector<std::pair<double, double>> u_pairs, m_pairs, sum_pairs;
  for (const Attempt& a : attempts) {
    result.rows.push_back(make_row(a, ref.solution));
    const LevelRow& row = result.rows.back();
    if (row.ok()) {
      u_pairs.emplace_back(row.h, row.err_u_h1);
      m_pairs.emplace_back(row.h, row.err_m_l2);
      sum_pairs.emplace_back(row.h, row.err_u_h1 + row.err_m_l2);
    }
  }
  if (n_levels >= 2) {
    add_fit(result, "err_u_h1", u_pairs);
    add_fit(result, "err_m_l2", m_pairs);
    add_fit(result, "err_sum", sum_pairs);
  }
  return result;
}

StudyResult study_joint(const ExperimentConfig& config, const RunOptions& options) {
  const SolverConfig solver = effective_solver(config, options);
  SolverConfig strict = solver;
  strict.fallback = false;
  const int ref_level = config.level_max + config.finer_levels;
  const std::vector<SpacePtr> spaces = build_hierarchy(config.domain, ref_level);
  const SpacePtr& fine = spaces[ref_level];
  StudyResult result;

  const auto n = static_cast<std::size_t>(config.level_max - config.level_min + 1);
  std::vector<double> lambdas;
  for (int k = config.level_min; k <= config.level_max; ++k) {
    lambdas.push_back(checked_lambda(config.coupled_lambda(mesh_size(spaces[k])), k));
  }
  std::vector<Attempt> discrete(n), regularized(n), stand_in(n);
  parallel_for(n, options.threads, [&](std::size_t i) {
    const SpacePtr& space = spaces[config.level_min + static_cast<int>(i)];
    discrete[i] = attempt_solve(config, space, std::nullopt, strict);
    regularized[i] = attempt_solve(config, space, lambdas[i], solver);
  });

  std::optional<WarmStart> warm;
  if (regularized.back().solution) warm = prolonged_warm_start(*regularized.back().solution, fine);
  const Attempt ref = compute_reference(config, solver, fine, warm ? &*warm : nullptr, result.notes);
  result.reference = reference_info(ref);
  const WarmStart ref_warm{ref.solution->u.values, ref.solution->m.values};
  parallel_for(n, options.threads, [&](std::size_t i) {
    stand_in[i] = attempt_solve(config, fine, lambdas[i], solver, &ref_warm);
  });

  const P1Space& fs = *fine;
  const auto on_fine = [&](const Attempt& a) -> std::optional<Vec> {
    if (!a.solution) return std::nullopt;
    const MfgSolution& s = *a.solution;
    if (s.m.space == fine) return s.m.values;
    return prolong_field(*s.m.space, fs, s.m.values);
  };
  const Vec& m_ref = ref.solution->m.values;
  std::vector<std::pair<double, double>> bottom_pairs, total_pairs;
  for (std::size_t i = 0; i < n; ++i) {
    const int level = config.level_min + static_cast<int>(i);
    const double h = mesh_size(spaces[level]);
    const auto m_k = on_fine(discrete[i]);
    const auto m_k_lambda = on_fine(regularized[i]);
    const auto m_lambda = on_fine(stand_in[i]);
    const auto leg = [&](const char* name, const std::optional<Vec>& a, const std::optional<Vec>& b) {
      const double value = a && b ? l2_norm(fs, *a - *b) : kNaN;
      result.joint.push_back(JointRow{level, h, lambdas[i], name, value});
      return value;
    };
    leg("top", m_ref, m_lambda);
    leg("left", m_lambda, m_k_lambda);
    const double bottom = leg("bottom", m_k_lambda, m_k);
    const double total = leg("total", m_ref, m_k);
    bottom_pairs.emplace_back(lambdas[i], bottom);
    total_pairs.emplace_back(h, total);
    if (!discrete[i].solution) {
      result.notes.push_back("level " + std::to_string(level) + ": unregularized solve failed (" +
                             discrete[i].error + ")");
    }
    result.rows.push_back(make_row(regularized[i], ref.solution));
  }
  if (n >= 2) {
    add_fit(result, "bottom_vs_lambda", bottom_pairs);
    add_fit(result, "total_vs_h", total_pairs);
  }
  return result;
}

// ---------------------------------------------------------------------------

namespace {

std::string fmt_value(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

std::string fmt_lambda(const std::optional<double>& lambda) {
  return lambda ? fmt_value(*lambda) : std::string("none");
}

}  // namespace

void write_table_csv(std::ostream& os, const StudyResult& result, bool timing) {
  os << "level,h,lambda,err_u_h1,err_m_l2,r1_dual,r2_dual,outer_iters,seconds\n";
  for (const LevelRow& r : result.rows) {
    os << r.level << ',' << fmt_value(r.h) << ',' << fmt_lambda(r.lambda) << ',' << fmt_value(r.err_u_h1)
       << ',' << fmt_value(r.err_m_l2) << ',' << fmt_value(r.r1_dual) << ',' << fmt_value(r.r2_dual) << ','
       << r.outer_iters << ',' << (timing ? fmt_value(r.seconds) : std::string("0")) << '\n';
  }
}

void write_joint_csv(std::ostream& os, const StudyResult& result) {
  os << "level,h,lambda,leg,value\n";
  for (const JointRow& r : result.joint) {
    os << r.level << ',' << fmt_value(r.h) << ',' << fmt_value(r.lambda) << ',' << r.leg << ','
       << fmt_value(r.value) << '\n';
  }
}

void write_solve_report(std::ostream& os, const ExperimentConfig& config, const SolveReport& r) {
  const Telemetry& t = r.solution.telemetry;
  os << "domain: " << to_string(config.domain) << '\n';
  os << "level: " << config.level_min << '\n';
  os << "seed: " << config.seed << '\n';
  os << "dofs: " << r.problem.space->n_dofs() << '\n';
  os << "h: " << fmt_value(r.h) << '\n';
  os << "lambda: " << fmt_lambda(t.lambda) << '\n';
  os << "path: " << (t.lambda ? "regularized" : "unregularized") << (t.used_fallback ? " (fallback)" : "")
     << '\n';
  os << "outer_iterations: " << t.outer_iterations << '\n';
  os << "inner_iterations:";
  for (int it : t.inner_iterations) os << ' ' << it;
  os << '\n';
  os << "final_increment: " << fmt_value(t.final_increment) << '\n';
  os << "sigma: " << fmt_value(t.sigma) << " (escalations: " << t.sigma_escalations << ")\n";
  os << "dmp: " << t.dmp.summary() << '\n';
  os << "hjb_residual_inf: " << fmt_value(t.hjb_residual_inf) << '\n';
  os << "kfp_residual_inf: " << fmt_value(t.kfp_residual_inf) << '\n';
  os << "residual_certificate: " << r.residuals.summary() << '\n';
  os << "min_m: " << fmt_value(r.nonnegativity.min_value) << " (below -1e-12: "
     << r.nonnegativity.violating.size() << ")\n";
  if (config.timing) os << "seconds: " << fmt_value(r.seconds) << '\n';
}

void write_study_report(std::ostream& os, const std::string& kind, const ExperimentConfig& config,
                        const StudyResult& result) {
  os << "study: " << kind << '\n';
  os << "domain: " << to_string(config.domain) << '\n';
  os << "levels: " << config.level_min << ".." << config.level_max << '\n';
  os << "gamma: " << fmt_value(config.gamma) << '\n';
  os << "seed: " << config.seed << '\n';
  os << "reference_level: " << result.reference.level << '\n';
  os << "reference_lambda: " << fmt_lambda(result.reference.lambda) << '\n';
  os << "reference_residuals: " << result.reference.residuals.summary() << '\n';
  std::size_t failed = 0;
  for (const LevelRow& r : result.rows) {
    if (!r.ok()) {
      ++failed;
      os << "failed: level " << r.level << " lambda " << fmt_lambda(r.lambda) << ": " << r.error << '\n';
    }
  }
  os << "rows: " << result.rows.size() << " (failed: " << failed << ")\n";
  for (const auto& [name, fit] : result.fits) {
    os << "slope " << name << ": " << fmt_value(fit.slope) << " (fit residual " << fmt_value(fit.fit_residual)
       << ", " << fit.pairs.size() << " points)\n";
  }
  for (const std::string& note : result.notes) os << "note: " << note << '\n';
}

int run_command(const std::string& command, const std::filesystem::path& config_file,
                const std::filesystem::path& out_dir, const RunOptions& options) {
  namespace fs = std::filesystem;
  try {
    if (command != "solve" && command != "study-h" && command != "study-lambda" && command != "study-joint") {
      throw ConfigError("unknown command '" + command + "'");
    }
    const ExperimentConfig config = load_experiment_config(config_file);
    fs::create_directories(out_dir);
    const auto open = [&](const char* name) {
      std::ofstream f(out_dir / name);
      if (!f) throw std::runtime_error("cannot write " + (out_dir / name).string());
      return f;
    };

    if (command == "solve") {
      const SolveReport r = run_solve(config, options);
      const P1Space& space = *r.problem.space;
      {
        auto f = open("u.csv");
        write_field_csv(f, space, r.solution.u.values);
      }
      {
        auto f = open("m.csv");
        write_field_csv(f, space, r.solution.m.values);
      }
      {
        auto f = open("report.txt");
        write_solve_report(f, config, r);
      }
      if (config.write_vtk) {
        auto f = open("solution.vtk");
        write_field_vtk(f, space, {{"u", r.solution.u.values}, {"m", r.solution.m.values}});
      }
      return 0;
    }

    StudyResult result;
    if (command == "study-h") result = study_h(config, options);
    else if (command == "study-lambda") result = study_lambda(config, options);
    else result = study_joint(config, options);
    {
      auto f = open("table.csv");
      write_table_csv(f, result, config.timing);
    }
    if (!result.fits.empty()) {
      auto f = open("rates.csv");
      write_rates_csv(f, result.fits);
    }
    if (command == "study-joint") {
      auto f = open("joint.csv");
      write_joint_csv(f, result);
    }
    {
      auto f = open("report.txt");
      write_study_report(f, command, config, result);
    }
    bool any_ok = false;
    for (const LevelRow& r : result.rows) any_ok = any_ok || r.ok();
    return any_ok ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid problem data: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mfgfem
