#include "mfgfem/fields.hpp"

#include <algorithm>
#include <cmath>

namespace mfgfem {

ScalarField constant_field(double value) {
  return [value](const Point&) { return value; };
}

VectorField constant_vector_field(double x, double y) {
  return [x, y](const Point&) { return Point{x, y}; };
}

std::optional<ScalarField> builtin_scalar_field(std::string_view name, int dim) {
  const bool one_d = dim == 1;
  if (name == "zero") return constant_field(0.0);
  if (name == "one") return constant_field(1.0);
  if (name == "x") return ScalarField([](const Point& p) { return p[0]; });
  if (name == "y") return ScalarField([](const Point& p) { return p[1]; });
  if (name == "sinxy") {
    return ScalarField([one_d](const Point& p) {
      const double sx = std::sin(M_PI * p[0]);
      return one_d ? sx : sx * std::sin(M_PI * p[1]);
    });
  }
  if (name == "poisson_sinxy") {
    return ScalarField([one_d](const Point& p) {
      const double sx = std::sin(M_PI * p[0]);
      return one_d ? M_PI * M_PI * sx : 2.0 * M_PI * M_PI * sx * std::sin(M_PI * p[1]);
    });
  }
  if (name == "bump") {
    return ScalarField([one_d](const Point& p) {
      const double bx = p[0] * (1.0 - p[0]);
      return one_d ? 4.0 * bx : 16.0 * bx * p[1] * (1.0 - p[1]);
    });
  }
  if (name == "cosx") {
    return ScalarField([](const Point& p) { return std::cos(2.0 * M_PI * p[0]); });
  }
  return std::nullopt;
}

std::optional<VectorField> builtin_vector_field(std::string_view name, int dim) {
  if (dim == 1) {
    if (name == "zero") return constant_vector_field(0.0);
    if (name == "ex") return constant_vector_field(1.0);
    return std::nullopt;
  }
  if (name == "zero") return constant_vector_field(0.0, 0.0);
  if (name == "ex") return constant_vector_field(1.0, 0.0);
  if (name == "ey") return constant_vector_field(0.0, 1.0);
  if (name == "rotation") {
    return VectorField([](const Point& p) { return Point{0.5 - p[1], p[0] - 0.5}; });
  }
  if (name == "swirl") {
    return VectorField([](const Point& p) {
      const double dx = p[0] - 0.5;
      const double dy = p[1] - 0.5;
      const double r = std::hypot(dx, dy);
      if (r == 0.0) return Point{0.0, 0.0};
      const double speed = std::min(1.0, 4.0 * r);
      return Point{-speed * dy / r, speed * dx / r};
    });
  }
  return std::nullopt;
}

std::vector<std::string> builtin_scalar_field_names() {
  return {"zero", "one", "x", "y", "sinxy", "poisson_sinxy", "bump", "cosx"};
}

std::vector<std::string> builtin_vector_field_names() {
  return {"zero", "ex", "ey", "rotation", "swirl"};
}

}  // namespace mfgfem
