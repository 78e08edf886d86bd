#pragma once

#include "mfgfem/fem.hpp"

namespace mfgfem {

/// KFP source G = g0 - div g1.
struct SourceG {
  ScalarField g0 = constant_field(1.0);
  VectorField g1 = constant_vector_field(0.0, 0.0);
  /// False when g1 is known to vanish, so that nonnegativity reduces to g0 >= 0.
  bool has_g1 = false;
};

/// Checks g0 >= 0 at the quadrature points of `space` when g1 is absent; with g1
/// present only logs that nonnegativity of G is not verified. Throws
/// std::invalid_argument on a negative sample.
void check_source(const P1Space& space, const SourceG& source);
/// <G, xi_i> over interior dofs.
Vec load_vector(const P1Space& space, const SourceG& source);

}  // namespace mfgfem
