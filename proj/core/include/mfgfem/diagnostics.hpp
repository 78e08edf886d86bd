#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mfgfem/solver.hpp"

namespace mfgfem {

struct ResidualReport {
  double r1_dual = 0.0;
  double r2_dual = 0.0;
  double r1_inf = 0.0;
  double r2_inf = 0.0;

  double total_dual() const { return r1_dual + r2_dual; }
  std::string summary() const;
};

std::string residual_csv_header();
std::string residual_csv_row(const ResidualReport& report);

/// Dual norm over the interior P1 space measured against the full H1 norm:
/// ||R|| = sup <R, v> / ||v||_H1 = sqrt(R^T G^-1 R) with G = mass + stiffness.
class RieszNorm {
 public:
  explicit RieszNorm(const P1Space& space);
  ~RieszNorm();
  RieszNorm(RieszNorm&&) noexcept;
  RieszNorm& operator=(RieszNorm&&) noexcept;

  /// `functional` holds <R, xi_i> for every interior basis function.
  double dual_norm(const Vec& functional) const;
  /// H1 norm of one basis function, sqrt(G_ii).
  double basis_norm(Eigen::Index i) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Functionals <R1, xi_i> = (F[m], xi_i) - (A grad u, grad xi_i) - (H[grad u], xi_i)
/// and <R2, xi_i> = <G, xi_i> - (A grad m, grad xi_i) - (m b, grad xi_i), with H and
/// b from the envelope of parameter lambda.
std::pair<Vec, Vec> residual_functionals(const MfgProblem& problem, const Discretization& disc,
                                         const Vec& u, const Vec& m, double lambda);
/// Same for the unregularized system with an explicit drift selection b.
std::pair<Vec, Vec> residual_functionals_with_drift(const MfgProblem& problem,
                                                    const Discretization& disc, const Vec& u,
                                                    const Vec& m, const DriftSamples& drift);

ResidualReport residuals(const MfgProblem& problem, const Discretization& disc, const Vec& u,
                         const Vec& m, double lambda);
ResidualReport residuals_with_drift(const MfgProblem& problem, const Discretization& disc,
                                    const Vec& u, const Vec& m, const DriftSamples& drift);
/// Residuals of a returned solution with the stabilization and regularization it
/// was computed with; the unregularized path uses the solver's drift selection.
ResidualReport residuals(const MfgProblem& problem, const MfgSolution& solution);

struct RateFit {
  std::vector<std::pair<double, double>> pairs;  // (parameter, error)
  double slope = 0.0;
  double intercept = 0.0;
  /// Root mean square of the log-error residuals around the fitted line.
  double fit_residual = 0.0;
};

/// Least-squares slope of log(error) against log(parameter). Throws
/// std::invalid_argument for fewer than two pairs or nonpositive entries.
RateFit fit_rate(const std::vector<std::pair<double, double>>& pairs);

struct NonnegativityReport {
  double min_value = 0.0;
  std::vector<Eigen::Index> violating;  // dofs below -tol
};

NonnegativityReport nonnegativity_report(const Vec& m, double tol = 1e-12);

/// quantity,slope,fit_residual,n_points
void write_rates_csv(std::ostream& os, const std::vector<std::pair<std::string, RateFit>>& fits);

}  // namespace mfgfem
