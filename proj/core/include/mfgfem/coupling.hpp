#pragma once

#include <optional>
#include <string_view>

#include "mfgfem/fem.hpp"

namespace mfgfem {

enum class CouplingKind { LocalLinear, LocalSaturating };

std::string_view to_string(CouplingKind kind);
std::optional<CouplingKind> parse_coupling_kind(std::string_view name);

/// Local coupling F[m](x) = kappa m(x) + rho_scale tanh(m(x)) + F0(x).
/// rho_scale is ignored for LocalLinear.
struct CouplingF {
  CouplingKind kind = CouplingKind::LocalLinear;
  double kappa = 1.0;
  double rho_scale = 0.0;
  ScalarField F0 = constant_field(0.0);

  /// Throws std::invalid_argument unless kappa > 0 and rho_scale >= 0.
  void validate() const;
  /// Strong monotonicity constant c_F.
  double monotonicity() const { return kappa; }
  /// Lipschitz constant L_F.
  double lipschitz() const {
    return kind == CouplingKind::LocalSaturating ? kappa + rho_scale : kappa;
  }
  /// F applied to a density value m at the point x.
  double operator()(const Point& x, double m) const;
};

/// F[m] at every quadrature point (element-major), given m at the same points.
Vec eval_F(const P1Space& space, const CouplingF& coupling, const Vec& m_samples);
/// (F[m], xi_i) over interior dofs.
Vec assemble_F_load(const P1Space& space, const CouplingF& coupling, const Vec& m);

}  // namespace mfgfem
