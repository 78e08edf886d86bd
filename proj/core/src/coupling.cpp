#include "mfgfem/coupling.hpp"

#include <cmath>
#include <stdexcept>

namespace mfgfem {

std::string_view to_string(CouplingKind kind) {
  return kind == CouplingKind::LocalLinear ? "local_linear" : "local_saturating";
}

std::optional<CouplingKind> parse_coupling_kind(std::string_view name) {
  if (name == "local_linear" || name == "linear") return CouplingKind::LocalLinear;
  if (name == "local_saturating" || name == "saturating") return CouplingKind::LocalSaturating;
  return std::nullopt;
}

void CouplingF::validate() const {
  if (!(kappa > 0.0)) throw std::invalid_argument("coupling: kappa must be positive");
  if (!(rho_scale >= 0.0)) throw std::invalid_argument("coupling: rho_scale must be nonnegative");
  if (!F0) throw std::invalid_argument("coupling: F0 is not set");
}

double CouplingF::operator()(const Point& x, double m) const {
  double value = kappa * m + F0(x);
  if (kind == CouplingKind::LocalSaturating) value += rho_scale * std::tanh(m);
  return value;
}

Vec eval_F(const P1Space& space, const CouplingF& coupling, const Vec& m_samples) {
  const std::size_t nq = space.quad_per_element();
  if (static_cast<std::size_t>(m_samples.size()) != space.num_quad_points()) {
    throw std::invalid_argument("eval_F: sample count does not match the quadrature");
  }
  Vec out(m_samples.size());
  for (std::size_t k = 0; k < space.num_elements(); ++k) {
    for (std::size_t q = 0; q < nq; ++q) {
      const auto idx = static_cast<Eigen::Index>(k * nq + q);
      out[idx] = coupling(space.quad_point(k, q), m_samples[idx]);
    }
  }
  return out;
}

Vec assemble_F_load(const P1Space& space, const CouplingF& coupling, const Vec& m) {
  return assemble_quadrature_load(space, eval_F(space, coupling, sample_at_quadrature(space, m)));
}

}  // namespace mfgfem
