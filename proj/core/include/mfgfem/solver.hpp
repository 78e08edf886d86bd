#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfgfem/coupling.hpp"
#include "mfgfem/fem.hpp"
#include "mfgfem/hamiltonian.hpp"
#include "mfgfem/source.hpp"

namespace mfgfem {

/// Data of one stationary MFG problem on a fixed P1 space. Without `lambda` the
/// unregularized inclusion is solved (Howard iteration); with it the
/// Moreau-Yosida regularized system (Newton).
struct MfgProblem {
  SpacePtr space;
  double nu = 1.0;
  std::shared_ptr<const PolyhedralHamiltonian> hamiltonian;
  std::optional<double> lambda;
  CouplingF coupling;
  SourceG source;
  double sigma = 0.5;
  StabilizationMode stabilization = StabilizationMode::EdgeAligned;
  QpMode qp_mode = QpMode::ActiveSetEnumeration;

  /// Throws std::invalid_argument on inconsistent data.
  void validate() const;
  MoreauEnvelope envelope() const;
};

struct SolverConfig {
  double outer_tol = 1e-9;
  int outer_max = 200;
  double theta = 0.5;
  double theta_min = 1.0 / 64.0;
  double inner_tol = 1e-11;
  int inner_max = 50;
  bool linesearch = true;
  /// Sigma doubles on a DMP failure and the solve restarts, at most this often.
  int max_sigma_escalations = 8;
  /// On Howard nonconvergence, retry with lambda = fallback_c * h^(2 gamma / 3).
  bool fallback = false;
  double fallback_c = 1.0;
  double fallback_gamma = 1.0;

  void validate() const;
};

/// Operators that depend only on the problem data and the stabilization scale.
struct Discretization {
  SpacePtr space;
  Stabilization stabilization;
  SparseOperator stiffness;  // (A_k grad ., grad .) with boundary row sums
  Vec source_load;           // <G, xi_i>
};

Discretization discretize(const MfgProblem& problem, double sigma);

/// Hamiltonian data at every quadrature point for a given u.
struct HamiltonianSamples {
  Vec values;               // H_lambda, or H on the unregularized path
  DriftSamples drift;       // envelope gradient, or the selected drift b_{i*}
  std::vector<int> policy;  // selected control per point (unregularized path)
  Vec costs;                // f_{i*} per point (unregularized path)
};

/// Evaluates H_lambda and its gradient (regularized) or H with the lowest-index
/// selection (unregularized) at the quadrature points.
HamiltonianSamples sample_hamiltonian(const MfgProblem& problem, const Vec& u);
/// Same with an explicit regularization choice, overriding problem.lambda.
HamiltonianSamples sample_hamiltonian(const MfgProblem& problem, const Vec& u,
                                      std::optional<double> lambda);

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, std::vector<double> history, int cycle_length = 0)
      : std::runtime_error(what), history_(std::move(history)), cycle_length_(cycle_length) {}
  const std::vector<double>& history() const { return history_; }
  /// Length of a detected policy cycle, 0 if none.
  int cycle_length() const { return cycle_length_; }

 private:
  std::vector<double> history_;
  int cycle_length_;
};

class DmpViolation : public std::runtime_error {
 public:
  DmpViolation(const std::string& what, DmpReport report)
      : std::runtime_error(what), report_(std::move(report)) {}
  const DmpReport& report() const { return report_; }

 private:
  DmpReport report_;
};

class LinearSolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Direct sparse LU with COLAMD ordering.
Vec linear_solve(const SparseOperator& op, const Vec& rhs);

struct InnerResult {
  Vec u;
  int iterations = 0;
  double residual_inf = 0.0;
  std::vector<double> history;
  HamiltonianSamples samples;  // at the returned u
};

/// Newton for (A grad u, grad v) + (H_lambda[grad u], v) = (F, v), F given as
/// its load vector.
InnerResult solve_hjb_regularized(const MfgProblem& problem, const Discretization& disc,
                                  const Vec& f_load, const Vec& u_init, const SolverConfig& config);
/// Howard policy iteration for the unregularized equation. Cycles are detected
/// over a window of 8 policies.
InnerResult solve_hjb_howard(const MfgProblem& problem, const Discretization& disc,
                             const Vec& f_load, const Vec& u_init, const SolverConfig& config);
/// HJB residual vector S u + (H[grad u], xi_i) - f_load.
Vec hjb_residual(const Discretization& disc, const HamiltonianSamples& samples, const Vec& u,
                 const Vec& f_load);

struct KfpResult {
  Vec m;
  DmpReport dmp;
};

/// Solves (S + C(drift)^T) m = source load after checking the DMP on S + C(drift).
/// Throws DmpViolation when the check fails.
KfpResult solve_kfp(const MfgProblem& problem, const Discretization& disc, const DriftSamples& drift);

struct Telemetry {
  int outer_iterations = 0;
  std::vector<int> inner_iterations;  // per outer step
  std::vector<double> increments;     // ||m_kfp - m|| per outer step
  double final_increment = 0.0;
  double hjb_residual_inf = 0.0;
  double kfp_residual_inf = 0.0;
  DmpReport dmp;
  int sigma_escalations = 0;
  double sigma = 0.0;
  double final_theta = 0.0;
  std::optional<double> lambda;  // regularization actually used
  bool used_fallback = false;
};

struct MfgSolution {
  NodalField u;
  NodalField m;
  DriftSamples drift;
  Telemetry telemetry;
};

/// Optional starting point for the outer iteration (e.g. a prolonged coarse solution).
struct WarmStart {
  Vec u;
  Vec m;
};

/// Damped fixed point between the HJB and KFP solves, followed by one undamped
/// pass so that the returned pair satisfies the KFP equation exactly for the
/// returned drift.
MfgSolution solve_mfg(const MfgProblem& problem, const SolverConfig& config,
                      const WarmStart* warm = nullptr);

}  // namespace mfgfem
