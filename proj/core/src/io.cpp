#include <iomanip>
#include <ostream>

#include "mfgfem/fem.hpp"

namespace mfgfem {

void write_field_csv(std::ostream& os, const P1Space& space, const Vec& values) {
  const Vec full = space.full_vector(values);
  const Mesh& mesh = space.mesh();
  os << "vertex_id,x,y,value\n" << std::setprecision(17);
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    const Point& p = mesh.vertex(v);
    os << v << ',' << p[0] << ',' << p[1] << ',' << full[static_cast<Eigen::Index>(v)] << '\n';
  }
}

void write_field_vtk(std::ostream& os, const P1Space& space,
                     const std::vector<std::pair<std::string, Vec>>& fields) {
  std::vector<std::pair<std::string, std::vector<double>>> data;
  for (const auto& [name, values] : fields) {
    const Vec full = space.full_vector(values);
    data.emplace_back(name, std::vector<double>(full.data(), full.data() + full.size()));
  }
  write_vtk(os, space.mesh(), data);
}

}  // namespace mfgfem
