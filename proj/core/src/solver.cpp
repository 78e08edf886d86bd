#include "mfgfem/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>

#include <Eigen/SparseLU>
#include <spdlog/spdlog.h>

namespace mfgfem {

void MfgProblem::validate() const {
  if (!space) throw std::invalid_argument("problem: no space");
  if (!(nu > 0.0)) throw std::invalid_argument("problem: nu must be positive");
  if (!hamiltonian) throw std::invalid_argument("problem: no Hamiltonian");
  if (hamiltonian->dim() != space->dim()) {
    throw std::invalid_argument("problem: Hamiltonian dimension does not match the mesh");
  }
  if (lambda && !(*lambda > 0.0 && *lambda <= 1.0)) {
    throw std::invalid_argument("problem: lambda must lie in (0, 1]");
  }
  if (!(sigma >= 0.0)) throw std::invalid_argument("problem: sigma must be nonnegative");
  coupling.validate();
  check_source(*space, source);
}

MoreauEnvelope MfgProblem::envelope() const {
  if (!lambda) throw std::logic_error("problem: no regularization parameter");
  return MoreauEnvelope(hamiltonian, *lambda, qp_mode);
}

void SolverConfig::validate() const {
  if (!(outer_tol > 0.0) || !(inner_tol > 0.0)) throw std::invalid_argument("solver: tolerances must be positive");
  if (outer_max < 1 || inner_max < 1) throw std::invalid_argument("solver: iteration limits must be positive");
  if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("solver: theta must lie in (0, 1]");
  if (!(theta_min > 0.0 && theta_min <= theta)) throw std::invalid_argument("solver: bad theta floor");
  if (max_sigma_escalations < 0) throw std::invalid_argument("solver: negative escalation limit");
}

Discretization discretize(const MfgProblem& problem, double sigma) {
  const P1Space& space = *problem.space;
  Discretization d;
  d.space = problem.space;
  d.stabilization = sigma > 0.0 && problem.stabilization != StabilizationMode::None
                        ? build_stabilization(space, problem.hamiltonian->lipschitz(), sigma,
                                              problem.stabilization)
                        : no_stabilization(space);
  d.stiffness = assemble_stiffness(space, problem.nu, d.stabilization);
  d.source_load = load_vector(space, problem.source);
  return d;
}

// ---------------------------------------------------------------------------

HamiltonianSamples sample_hamiltonian(const MfgProblem& problem, const Vec& u) {
  return sample_hamiltonian(problem, u, problem.lambda);
}

HamiltonianSamples sample_hamiltonian(const MfgProblem& problem, const Vec& u,
                                      std::optional<double> lambda) {
  const P1Space& space = *problem.space;
  const PolyhedralHamiltonian& ham = *problem.hamiltonian;
  const int dim = space.dim();
  const std::size_t nq = space.quad_per_element();
  const auto total = static_cast<Eigen::Index>(space.num_quad_points());
  std::optional<MoreauEnvelope> env;
  if (lambda) env.emplace(problem.hamiltonian, *lambda, problem.qp_mode);

  HamiltonianSamples s;
  s.values.resize(total);
  s.drift = DriftSamples::Zero(2, total);
  if (!env) {
    s.policy.resize(static_cast<std::size_t>(total));
    s.costs.resize(total);
  }
  // With x-independent controls the element gradient fixes every sample.
  const bool per_element = ham.is_constant();
  SmallVec p(dim), x(dim);
  for (std::size_t k = 0; k < space.num_elements(); ++k) {
    const Point g = space.gradient(u, k);
    for (int i = 0; i < dim; ++i) p[i] = g[i];
    for (std::size_t q = 0; q < nq; ++q) {
      const auto idx = static_cast<Eigen::Index>(k * nq + q);
      if (per_element && q > 0) {
        s.values[idx] = s.values[idx - 1];
        s.drift.col(idx) = s.drift.col(idx - 1);
        if (!env) {
          s.policy[idx] = s.policy[idx - 1];
          s.costs[idx] = s.costs[idx - 1];
        }
        continue;
      }
      const Point xq = space.quad_point(k, q);
      for (int i = 0; i < dim; ++i) x[i] = xq[i];
      if (env) {
        const auto [value, grad] = env->value_and_gradient(x, p);
        s.values[idx] = value;
        for (int i = 0; i < dim; ++i) s.drift(i, idx) = grad[i];
      } else {
        const HamiltonianValue hv = ham.eval(x, p);
        const auto sel = static_cast<std::size_t>(hv.argmax_index);
        const SmallVec b = ham.drift(sel, x);
        s.values[idx] = hv.value;
        for (int i = 0; i < dim; ++i) s.drift(i, idx) = b[i];
        s.policy[idx] = hv.argmax_index;
        s.costs[idx] = ham.cost(sel, x);
      }
    }
  }
  return s;
}

Vec hjb_residual(const Discretization& disc, const HamiltonianSamples& samples, const Vec& u,
                 const Vec& f_load) {
  return disc.stiffness.apply(u) + assemble_quadrature_load(*disc.space, samples.values) - f_load;
}

// ---------------------------------------------------------------------------

Vec linear_solve(const SparseOperator& op, const Vec& rhs) {
  if (op.size() != rhs.size()) throw std::invalid_argument("linear_solve: dimension mismatch");
  if (op.size() == 0) return Vec();
  const Eigen::SparseMatrix<double> a = op.matrix();
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() != Eigen::Success) {
    throw LinearSolveError("linear_solve: factorization failed: " + lu.lastErrorMessage());
  }
  Vec x = lu.solve(rhs);
  const double bound = 1e-10 * (1.0 + rhs.lpNorm<Eigen::Infinity>());
  Vec r = rhs - a * x;
  if (r.lpNorm<Eigen::Infinity>() > bound) {
    x += lu.solve(r);  // one step of iterative refinement
    r = rhs - a * x;
  }
  if (!x.allFinite() || r.lpNorm<Eigen::Infinity>() > bound) {
    throw LinearSolveError("linear_solve: residual " + std::to_string(r.lpNorm<Eigen::Infinity>()) +
                           " above " + std::to_string(bound));
  }
  return x;
}

namespace {

// Newton iteration. With `polish`, full steps continue below inner_tol for as
// long as they reduce the residual (the nodal tolerance is h-independent while
// the dual norm of the residual is not).
InnerResult newton(const MfgProblem& problem, const Discretization& disc, const Vec& f_load,
                   const Vec& u_init, const SolverConfig& config, bool polish) {
  if (!problem.lambda) throw std::invalid_argument("solve_hjb_regularized: lambda is not set");
  const P1Space& space = *disc.space;
  constexpr int kPolishSteps = 3;
  InnerResult out;
  out.u = u_init;
  out.samples = sample_hamiltonian(problem, out.u);
  Vec r = hjb_residual(disc, out.samples, out.u, f_load);
  double norm = r.lpNorm<Eigen::Infinity>();
  out.history.push_back(norm);
  int polished = 0;
  while (norm > config.inner_tol || (polish && polished < kPolishSteps && norm > 0.0)) {
    const bool polishing = norm <= config.inner_tol;
    if (out.iterations >= config.inner_max) {
      if (polishing) break;
      throw NonConvergence("HJB Newton: inner_max reached", out.history);
    }
    ++out.iterations;
    const SparseOperator jac = disc.stiffness + assemble_convection(space, out.samples.drift);
    const Vec du = linear_solve(jac, -r);
    if (polishing) {
      ++polished;
      Vec u_try = out.u + du;
      HamiltonianSamples s_try = sample_hamiltonian(problem, u_try);
      Vec r_try = hjb_residual(disc, s_try, u_try, f_load);
      const double n_try = r_try.lpNorm<Eigen::Infinity>();
      if (!(n_try < 0.5 * norm)) break;
      out.u = std::move(u_try);
      out.samples = std::move(s_try);
      r = std::move(r_try);
      norm = n_try;
      out.history.push_back(norm);
      continue;
    }
    double step = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= 20; ++halving, step *= 0.5) {
      Vec u_try = out.u + step * du;
      HamiltonianSamples s_try = sample_hamiltonian(problem, u_try);
      Vec r_try = hjb_residual(disc, s_try, u_try, f_load);
      const double n_try = r_try.lpNorm<Eigen::Infinity>();
      if (!config.linesearch || n_try < norm) {
        out.u = std::move(u_try);
        out.samples = std::move(s_try);
        r = std::move(r_try);
        norm = n_try;
        accepted = true;
        break;
      }
    }
    out.history.push_back(norm);
    if (!accepted) throw NonConvergence("HJB Newton: line search failed", out.history);
  }
  out.residual_inf = norm;
  return out;
}

}  // namespace

InnerResult solve_hjb_regularized(const MfgProblem& problem, const Discretization& disc,
                                  const Vec& f_load, const Vec& u_init, const SolverConfig& config) {
  return newton(problem, disc, f_load, u_init, config, false);
}

namespace {

std::uint64_t hash_policy(const std::vector<int>& policy) {
  std::uint64_t h = 1469598103934665603ull;
  for (int v : policy) {
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

InnerResult solve_hjb_howard(const MfgProblem& problem, const Discretization& disc,
                             const Vec& f_load, const Vec& u_init, const SolverConfig& config) {
  if (problem.lambda) throw std::invalid_argument("solve_hjb_howard: problem is regularized");
  const P1Space& space = *disc.space;
  constexpr std::size_t kWindow = 8;
  InnerResult out;
  out.u = u_init;
  out.samples = sample_hamiltonian(problem, out.u);
  std::deque<std::uint64_t> recent{hash_policy(out.samples.policy)};
  double norm = hjb_residual(disc, out.samples, out.u, f_load).lpNorm<Eigen::Infinity>();
  out.history.push_back(norm);
  while (norm > config.inner_tol) {
    if (out.iterations >= config.inner_max) {
      throw NonConvergence("Howard: inner_max reached", out.history);
    }
    ++out.iterations;
    const SparseOperator op = disc.stiffness + assemble_convection(space, out.samples.drift);
    const Vec rhs = f_load + assemble_quadrature_load(space, out.samples.costs);
    out.u = linear_solve(op, rhs);
    HamiltonianSamples next = sample_hamiltonian(problem, out.u);
    const bool unchanged = next.policy == out.samples.policy;
    out.samples = std::move(next);
    norm = hjb_residual(disc, out.samples, out.u, f_load).lpNorm<Eigen::Infinity>();
    out.history.push_back(norm);
    if (unchanged) break;
    const std::uint64_t h = hash_policy(out.samples.policy);
    const auto seen = std::find(recent.rbegin(), recent.rend(), h);
    if (seen != recent.rend() && norm > config.inner_tol) {
      const int cycle = static_cast<int>(std::distance(recent.rbegin(), seen)) + 1;
      throw NonConvergence("Howard: policy cycle of length " + std::to_string(cycle), out.history, cycle);
    }
    recent.push_back(h);
    if (recent.size() > kWindow) recent.pop_front();
  }
  out.residual_inf = norm;
  return out;
}

KfpResult solve_kfp(const MfgProblem& problem, const Discretization& disc, const DriftSamples& drift) {
  const P1Space& space = *disc.space;
  const SparseOperator conv = assemble_convection(space, drift, problem.hamiltonian->lipschitz());
  KfpResult out;
  out.dmp = verify_dmp(disc.stiffness + conv, space);
  if (!out.dmp.passed()) throw DmpViolation("KFP operator violates the DMP: " + out.dmp.summary(), out.dmp);
  out.m = linear_solve(kfp_operator(disc.stiffness, conv), disc.source_load);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

InnerResult solve_hjb(const MfgProblem& problem, const Discretization& disc, const Vec& f_load,
                      const Vec& u_init, const SolverConfig& config, bool polish = false) {
  return problem.lambda ? newton(problem, disc, f_load, u_init, config, polish)
                        : solve_hjb_howard(problem, disc, f_load, u_init, config);
}

MfgSolution run_fixed_point(const MfgProblem& problem, const SolverConfig& config, double sigma,
                            const WarmStart* warm) {
  const P1Space& space = *problem.space;
  const Discretization disc = discretize(problem, sigma);
  const auto n = static_cast<Eigen::Index>(space.n_dofs());
  Vec u = warm ? warm->u : Vec::Zero(n);
  Vec m = warm ? warm->m : Vec::Zero(n);
  if (u.size() != n || m.size() != n) throw std::invalid_argument("solve_mfg: warm start has wrong size");

  MfgSolution sol;
  Telemetry& t = sol.telemetry;
  t.sigma = sigma;
  t.lambda = problem.lambda;
  double theta = config.theta;
  double previous = std::numeric_limits<double>::infinity();
  std::deque<std::uint64_t> policies;  // unregularized path: recent outer policies

  for (int it = 1; it <= config.outer_max; ++it) {
    const InnerResult inner = solve_hjb(problem, disc, assemble_F_load(space, problem.coupling, m), u, config);
    u = inner.u;
    const KfpResult kfp = solve_kfp(problem, disc, inner.samples.drift);
    const double increment = l2_norm(space, kfp.m - m);
    t.outer_iterations = it;
    t.inner_iterations.push_back(inner.iterations);
    t.increments.push_back(increment);
    spdlog::debug("outer {}: increment {:.3e}, theta {:.4g}, inner {}", it, increment, theta,
                  inner.iterations);

    if (increment <= config.outer_tol * (1.0 + l2_norm(space, m)) &&
        inner.residual_inf <= config.inner_tol) {
      const Vec f_final = assemble_F_load(space, problem.coupling, kfp.m);
      InnerResult last = solve_hjb(problem, disc, f_final, u, config, true);
      KfpResult kfp_last = solve_kfp(problem, disc, last.samples.drift);
      t.final_increment = increment;
      t.final_theta = theta;
      t.dmp = kfp_last.dmp;
      const Vec f_at_m = assemble_F_load(space, problem.coupling, kfp_last.m);
      t.hjb_residual_inf = hjb_residual(disc, last.samples, last.u, f_at_m).lpNorm<Eigen::Infinity>();
      const SparseOperator kop =
          kfp_operator(disc.stiffness, assemble_convection(space, last.samples.drift));
      t.kfp_residual_inf = (kop.apply(kfp_last.m) - disc.source_load).lpNorm<Eigen::Infinity>();
      sol.u = NodalField{problem.space, std::move(last.u)};
      sol.m = NodalField{problem.space, std::move(kfp_last.m)};
      sol.drift = std::move(last.samples.drift);
      return sol;
    }
    if (increment > previous) theta = std::max(0.5 * theta, config.theta_min);
    previous = increment;
    if (!problem.lambda) {
      // Chattering: with damping exhausted the selection returns to an earlier,
      // different policy instead of settling.
      const std::uint64_t h = hash_policy(inner.samples.policy);
      const auto seen = std::find(policies.rbegin(), policies.rend(), h);
      if (theta <= config.theta_min && seen != policies.rend() && seen != policies.rbegin()) {
        const int cycle = static_cast<int>(std::distance(policies.rbegin(), seen)) + 1;
        throw NonConvergence("outer fixed point: policy chattering with cycle length " + std::to_string(cycle),
                             t.increments, cycle);
      }
      policies.push_back(h);
      if (policies.size() > 8) policies.pop_front();
    }
    m = (1.0 - theta) * m + theta * kfp.m;
  }
  throw NonConvergence("outer fixed point: outer_max reached", t.increments);
}

MfgSolution solve_with_escalation(const MfgProblem& problem, const SolverConfig& config,
                                  const WarmStart* warm) {
  double sigma = problem.sigma;
  for (int escalations = 0;; ++escalations) {
    try {
      MfgSolution sol = run_fixed_point(problem, config, sigma, warm);
      sol.telemetry.sigma_escalations = escalations;
      return sol;
    } catch (const DmpViolation& e) {
      if (sigma <= 0.0 || escalations >= config.max_sigma_escalations) throw;
      spdlog::warn("DMP check failed with sigma = {:.4g}; doubling and restarting", sigma);
      sigma *= 2.0;
    }
  }
}

}  // namespace

MfgSolution solve_mfg(const MfgProblem& problem, const SolverConfig& config, const WarmStart* warm) {
  problem.validate();
  config.validate();
  if (problem.lambda || !config.fallback) return solve_with_escalation(problem, config, warm);
  try {
    return solve_with_escalation(problem, config, warm);
  } catch (const NonConvergence& e) {
    const double h = metrics(problem.space->mesh()).h_max;
    const double lambda =
        std::min(1.0, config.fallback_c * std::pow(h, 2.0 * config.fallback_gamma / 3.0));
    spdlog::warn("unregularized solve failed ({}); falling back to lambda = {:.6g}", e.what(), lambda);
    MfgProblem regularized = problem;
    regularized.lambda = lambda;
    MfgSolution sol = solve_with_escalation(regularized, config, warm);
    sol.telemetry.used_fallback = true;
    return sol;
  }
}

}  // namespace mfgfem
