#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mfgfem/mesh.hpp"

namespace mfgfem {

/// Scalar data on the domain, evaluated at quadrature points.
using ScalarField = std::function<double(const Point&)>;
/// Vector data on the domain; the second component is ignored in 1D.
using VectorField = std::function<Point(const Point&)>;

ScalarField constant_field(double value);
VectorField constant_vector_field(double x, double y = 0.0);

/// Named scalar fields usable from configuration files:
///   zero, one, sinxy (sin(pi x) sin(pi y), 1D: sin(pi x)), poisson_sinxy
///   (the matching -Laplacian: 2 pi^2 sin sin in 2D, pi^2 sin in 1D),
///   x, y, bump (16 x(1-x) y(1-y), 1D: 4 x(1-x)), cosx (cos(2 pi x)).
std::optional<ScalarField> builtin_scalar_field(std::string_view name, int dim);
/// Named vector fields: zero, rotation ((1/2 - y, x - 1/2)), swirl
/// (unit-speed rotation scaled by 4 r, capped at 1), ex, ey.
std::optional<VectorField> builtin_vector_field(std::string_view name, int dim);

std::vector<std::string> builtin_scalar_field_names();
std::vector<std::string> builtin_vector_field_names();

}  // namespace mfgfem
