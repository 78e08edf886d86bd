#include "mfgfem/source.hpp"

#include <stdexcept>

#include <spdlog/spdlog.h>

namespace mfgfem {

void check_source(const P1Space& space, const SourceG& source) {
  if (source.has_g1) {
    spdlog::info("source: g1 given, distributional nonnegativity of G is not checked");
    return;
  }
  for (std::size_t k = 0; k < space.num_elements(); ++k) {
    for (std::size_t q = 0; q < space.quad_per_element(); ++q) {
      const Point x = space.quad_point(k, q);
      const double v = source.g0(x);
      if (v < 0.0) {
        throw std::invalid_argument("source: g0 is negative at (" + std::to_string(x[0]) + ", " +
                                    std::to_string(x[1]) + ")");
      }
    }
  }
}

Vec load_vector(const P1Space& space, const SourceG& source) {
  return assemble_load_G(space, source.g0, source.g1);
}

}  // namespace mfgfem
