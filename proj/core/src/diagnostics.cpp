#include "mfgfem/diagnostics.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <Eigen/QR>
#include <Eigen/SparseCholesky>

namespace mfgfem {

std::string ResidualReport::summary() const {
  std::ostringstream os;
  os << std::setprecision(6) << "||R1||_V* = " << r1_dual << ", ||R2||_V* = " << r2_dual
     << ", |R1|_inf = " << r1_inf << ", |R2|_inf = " << r2_inf;
  return os.str();
}

std::string residual_csv_header() { return "r1_dual,r2_dual,r1_inf,r2_inf"; }

std::string residual_csv_row(const ResidualReport& r) {
  std::ostringstream os;
  os << std::setprecision(10) << r.r1_dual << ',' << r.r2_dual << ',' << r.r1_inf << ',' << r.r2_inf;
  return os.str();
}

struct RieszNorm::Impl {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  Vec diagonal;
};

RieszNorm::RieszNorm(const P1Space& space) : impl_(std::make_unique<Impl>()) {
  const SparseOperator gram = assemble_mass(space) + assemble_stiffness(space, 1.0, no_stabilization(space));
  const Eigen::SparseMatrix<double> g = gram.matrix();
  impl_->diagonal = g.diagonal();
  if (g.rows() == 0) return;
  impl_->ldlt.compute(g);
  if (impl_->ldlt.info() != Eigen::Success) throw std::runtime_error("RieszNorm: Gram factorization failed");
}

RieszNorm::~RieszNorm() = default;
RieszNorm::RieszNorm(RieszNorm&&) noexcept = default;
RieszNorm& RieszNorm::operator=(RieszNorm&&) noexcept = default;

double RieszNorm::dual_norm(const Vec& functional) const {
  if (functional.size() != impl_->diagonal.size()) {
    throw std::invalid_argument("RieszNorm: functional has wrong size");
  }
  if (functional.size() == 0) return 0.0;
  const Vec r = impl_->ldlt.solve(functional);
  return std::sqrt(std::max(0.0, functional.dot(r)));
}

double RieszNorm::basis_norm(Eigen::Index i) const { return std::sqrt(impl_->diagonal[i]); }

std::pair<Vec, Vec> residual_functionals_with_drift(const MfgProblem& problem,
                                                    const Discretization& disc, const Vec& u,
                                                    const Vec& m, const DriftSamples& drift) {
  const P1Space& space = *disc.space;
  const HamiltonianSamples h = sample_hamiltonian(problem, u, std::nullopt);
  Vec r1 = -hjb_residual(disc, h, u, assemble_F_load(space, problem.coupling, m));
  const SparseOperator kop = kfp_operator(disc.stiffness, assemble_convection(space, drift));
  Vec r2 = disc.source_load - kop.apply(m);
  return {std::move(r1), std::move(r2)};
}

std::pair<Vec, Vec> residual_functionals(const MfgProblem& problem, const Discretization& disc,
                                         const Vec& u, const Vec& m, double lambda) {
  const P1Space& space = *disc.space;
  const HamiltonianSamples h = sample_hamiltonian(problem, u, lambda);
  Vec r1 = -hjb_residual(disc, h, u, assemble_F_load(space, problem.coupling, m));
  const SparseOperator kop = kfp_operator(disc.stiffness, assemble_convection(space, h.drift));
  Vec r2 = disc.source_load - kop.apply(m);
  return {std::move(r1), std::move(r2)};
}

namespace {

ResidualReport report_from(const P1Space& space, const Vec& r1, const Vec& r2) {
  const RieszNorm riesz(space);
  ResidualReport rep;
  rep.r1_dual = riesz.dual_norm(r1);
  rep.r2_dual = riesz.dual_norm(r2);
  rep.r1_inf = r1.size() ? r1.lpNorm<Eigen::Infinity>() : 0.0;
  rep.r2_inf = r2.size() ? r2.lpNorm<Eigen::Infinity>() : 0.0;
  return rep;
}

}  // namespace

ResidualReport residuals(const MfgProblem& problem, const Discretization& disc, const Vec& u,
                         const Vec& m, double lambda) {
  const auto [r1, r2] = residual_functionals(problem, disc, u, m, lambda);
  return report_from(*disc.space, r1, r2);
}

ResidualReport residuals_with_drift(const MfgProblem& problem, const Discretization& disc,
                                    const Vec& u, const Vec& m, const DriftSamples& drift) {
  const auto [r1, r2] = residual_functionals_with_drift(problem, disc, u, m, drift);
  return report_from(*disc.space, r1, r2);
}

ResidualReport residuals(const MfgProblem& problem, const MfgSolution& solution) {
  const Discretization disc = discretize(problem, solution.telemetry.sigma);
  if (solution.telemetry.lambda) {
    return residuals(problem, disc, solution.u.values, solution.m.values, *solution.telemetry.lambda);
  }
  return residuals_with_drift(problem, disc, solution.u.values, solution.m.values, solution.drift);
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 2) throw std::invalid_argument("fit_rate: needs at least two pairs");
  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd a(n, 2);
  Vec b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [x, y] = pairs[static_cast<std::size_t>(i)];
    if (!(x > 0.0) || !(y > 0.0) || !std::isfinite(x) || !std::isfinite(y)) {
      throw std::invalid_argument("fit_rate: parameters and errors must be positive and finite");
    }
    a(i, 0) = std::log(x);
    a(i, 1) = 1.0;
    b[i] = std::log(y);
  }
  const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(b);
  RateFit fit;
  fit.pairs = pairs;
  fit.slope = coef[0];
  fit.intercept = coef[1];
  fit.fit_residual = std::sqrt((a * coef - b).squaredNorm() / static_cast<double>(n));
  return fit;
}

NonnegativityReport nonnegativity_report(const Vec& m, double tol) {
  NonnegativityReport rep;
  rep.min_value = m.size() ? m.minCoeff() : 0.0;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (m[i] < -tol) rep.violating.push_back(i);
  }
  return rep;
}

void write_rates_csv(std::ostream& os, const std::vector<std::pair<std::string, RateFit>>& fits) {
  os << "quantity,slope,fit_residual,n_points\n";
  os << std::setprecision(10);
  for (const auto& [name, fit] : fits) {
    os << name << ',' << fit.slope << ',' << fit.fit_residual << ',' << fit.pairs.size() << '\n';
  }
}

}  // namespace mfgfem
