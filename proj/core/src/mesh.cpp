#include "mfgfem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mfgfem {

namespace {

double distance(const Point& a, const Point& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

Point midpoint(const Point& a, const Point& b) {
  return {0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
}

using Facet = std::pair<int, int>;  // (min, max) vertex index; 1D facets use (v, v)

Facet make_facet(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

// Facets with their use count, in first-seen order per element.
std::map<Facet, int> count_facets(const Mesh& mesh) {
  std::map<Facet, int> count;
  for (const auto& e : mesh.elements()) {
    if (mesh.dim() == 1) {
      ++count[{e[0], e[0]}];
      ++count[{e[1], e[1]}];
    } else {
      ++count[make_facet(e[0], e[1])];
      ++count[make_facet(e[1], e[2])];
      ++count[make_facet(e[2], e[0])];
    }
  }
  return count;
}

}  // namespace

std::string_view to_string(DomainTag tag) {
  switch (tag) {
    case DomainTag::UnitInterval: return "unit_interval";
    case DomainTag::UnitSquare: return "unit_square";
    case DomainTag::LShape: return "lshape";
  }
  return "unknown";
}

std::optional<DomainTag> parse_domain_tag(std::string_view name) {
  if (name == "unit_interval" || name == "UnitInterval" || name == "interval") {
    return DomainTag::UnitInterval;
  }
  if (name == "unit_square" || name == "UnitSquare" || name == "square") {
    return DomainTag::UnitSquare;
  }
  if (name == "lshape" || name == "LShape" || name == "l_shape") return DomainTag::LShape;
  return std::nullopt;
}

int domain_dimension(DomainTag tag) { return tag == DomainTag::UnitInterval ? 1 : 2; }

bool on_domain_boundary(DomainTag tag, const Point& x, double tol) {
  const auto near = [tol](double a, double b) { return std::abs(a - b) <= tol; };
  switch (tag) {
    case DomainTag::UnitInterval:
      return near(x[0], 0.0) || near(x[0], 1.0);
    case DomainTag::UnitSquare:
      return near(x[0], 0.0) || near(x[0], 1.0) || near(x[1], 0.0) || near(x[1], 1.0);
    case DomainTag::LShape: {
      if (near(x[0], 0.0) || near(x[1], 0.0)) return true;
      if (near(x[0], 1.0) && x[1] <= 0.5 + tol) return true;
      if (near(x[1], 1.0) && x[0] <= 0.5 + tol) return true;
      if (near(x[0], 0.5) && x[1] >= 0.5 - tol) return true;
      if (near(x[1], 0.5) && x[0] >= 0.5 - tol) return true;
      return false;
    }
  }
  return false;
}

Mesh::Mesh(int dim, DomainTag tag, std::vector<Point> vertices,
           std::vector<std::array<int, 3>> elements, int level,
           std::optional<RefinementRecord> refinement)
    : dim_(dim),
      tag_(tag),
      vertices_(std::move(vertices)),
      elements_(std::move(elements)),
      level_(level),
      refinement_(std::move(refinement)) {
  if (dim_ != 1 && dim_ != 2) throw std::invalid_argument("Mesh: dimension must be 1 or 2");
  if (dim_ != domain_dimension(tag_)) {
    throw std::invalid_argument("Mesh: dimension does not match domain");
  }
  for (std::size_t k = 0; k < elements_.size(); ++k) {
    for (int j = 0; j <= dim_; ++j) {
      const int v = elements_[k][j];
      if (v < 0 || static_cast<std::size_t>(v) >= vertices_.size()) {
        throw std::invalid_argument("Mesh: element references a missing vertex");
      }
    }
    if (!(element_measure(k) > 0.0)) {
      throw std::invalid_argument("Mesh: element " + std::to_string(k) +
                                  " is degenerate or negatively oriented");
    }
  }
  mark_boundary();
}

void Mesh::mark_boundary() {
  boundary_.assign(vertices_.size(), false);
  for (const auto& [facet, uses] : count_facets(*this)) {
    if (uses == 1) {
      boundary_[facet.first] = true;
      boundary_[facet.second] = true;
    }
  }
}

std::size_t Mesh::num_interior_vertices() const {
  return static_cast<std::size_t>(std::count(boundary_.begin(), boundary_.end(), false));
}

double Mesh::element_measure(std::size_t k) const {
  const auto& e = elements_[k];
  const Point& a = vertices_[e[0]];
  const Point& b = vertices_[e[1]];
  if (dim_ == 1) return b[0] - a[0];
  const Point& c = vertices_[e[2]];
  return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
}

double Mesh::element_diameter(std::size_t k) const {
  const auto& e = elements_[k];
  if (dim_ == 1) return std::abs(vertices_[e[1]][0] - vertices_[e[0]][0]);
  return std::max({distance(vertices_[e[0]], vertices_[e[1]]),
                   distance(vertices_[e[1]], vertices_[e[2]]),
                   distance(vertices_[e[2]], vertices_[e[0]])});
}

MeshPtr build_structured(DomainTag tag, int n) {
  if (n < 1) throw std::invalid_argument("build_structured: n must be >= 1");
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> elements;

  if (tag == DomainTag::UnitInterval) {
    for (int i = 0; i <= n; ++i) vertices.push_back({static_cast<double>(i) / n, 0.0});
    for (int i = 0; i < n; ++i) elements.push_back({i, i + 1, -1});
    return std::make_shared<const Mesh>(1, tag, std::move(vertices), std::move(elements));
  }

  if (tag == DomainTag::LShape && n % 2 != 0) {
    throw std::invalid_argument("build_structured: LShape needs an even n");
  }
  const auto removed_cell = [&](int i, int j) {
    return tag == DomainTag::LShape && i >= n / 2 && j >= n / 2;
  };
  const auto removed_vertex = [&](int i, int j) {
    return tag == DomainTag::LShape && i > n / 2 && j > n / 2;
  };

  std::vector<int> index((n + 1) * (n + 1), -1);
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      if (removed_vertex(i, j)) continue;
      index[j * (n + 1) + i] = static_cast<int>(vertices.size());
      vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    }
  }
  const auto id = [&](int i, int j) { return index[j * (n + 1) + i]; };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (removed_cell(i, j)) continue;
      elements.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
      elements.push_back({id(i + 1, j + 1), id(i, j + 1), id(i + 1, j)});
    }
  }
  return std::make_shared<const Mesh>(2, tag, std::move(vertices), std::move(elements));
}

MeshPtr build_level(DomainTag tag, int level) {
  if (level < 0) throw std::invalid_argument("build_level: level must be >= 0");
  MeshPtr mesh = build_structured(tag, tag == DomainTag::LShape ? 2 : 1);
  for (int k = 0; k < level; ++k) mesh = refine_uniform(mesh);
  return mesh;
}

MeshPtr refine_uniform(const MeshPtr& mesh) {
  if (!mesh) throw std::invalid_argument("refine_uniform: null mesh");
  std::vector<Point> vertices = mesh->vertices();
  std::vector<std::array<int, 3>> elements;
  RefinementRecord record;
  record.parent = mesh;

  std::map<Facet, int> midpoint_of;
  const auto mid = [&](int a, int b) {
    const Facet key = make_facet(a, b);
    auto it = midpoint_of.find(key);
    if (it != midpoint_of.end()) return it->second;
    const int v = static_cast<int>(vertices.size());
    vertices.push_back(midpoint(vertices[a], vertices[b]));
    record.midpoint_parents.emplace_back(key.first, key.second);
    midpoint_of.emplace(key, v);
    return v;
  };

  for (std::size_t k = 0; k < mesh->num_elements(); ++k) {
    const auto& e = mesh->element(k);
    const int parent = static_cast<int>(k);
    if (mesh->dim() == 1) {
      const int m = mid(e[0], e[1]);
      elements.push_back({e[0], m, -1});
      elements.push_back({m, e[1], -1});
      record.parent_element.insert(record.parent_element.end(), 2, parent);
    } else {
      const int ab = mid(e[0], e[1]);
      const int bc = mid(e[1], e[2]);
      const int ca = mid(e[2], e[0]);
      elements.push_back({e[0], ab, ca});
      elements.push_back({ab, e[1], bc});
      elements.push_back({ca, bc, e[2]});
      elements.push_back({ab, bc, ca});
      record.parent_element.insert(record.parent_element.end(), 4, parent);
    }
  }
  return std::make_shared<const Mesh>(mesh->dim(), mesh->domain(), std::move(vertices),
                                      std::move(elements), mesh->level() + 1,
                                      std::move(record));
}

MeshMetrics metrics(const Mesh& mesh) {
  MeshMetrics out;
  out.h_per_element.resize(mesh.num_elements());
  for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
    const double diam = mesh.element_diameter(k);
    out.h_per_element[k] = diam;
    out.h_max = std::max(out.h_max, diam);
    if (mesh.dim() == 1) {
      out.shape_regularity = std::max(out.shape_regularity, 2.0);
      continue;
    }
    const auto& e = mesh.element(k);
    const Point& a = mesh.vertex(e[0]);
    const Point& b = mesh.vertex(e[1]);
    const Point& c = mesh.vertex(e[2]);
    const double la = distance(b, c);
    const double lb = distance(c, a);
    const double lc = distance(a, b);
    const double inradius = 2.0 * mesh.element_measure(k) / (la + lb + lc);
    out.shape_regularity = std::max(out.shape_regularity, diam / inradius);
    const auto angle = [](double opposite, double s1, double s2) {
      const double cosine = (s1 * s1 + s2 * s2 - opposite * opposite) / (2.0 * s1 * s2);
      return std::acos(std::clamp(cosine, -1.0, 1.0));
    };
    const double largest = std::max({angle(la, lb, lc), angle(lb, lc, la), angle(lc, la, lb)});
    out.max_angle_deg = std::max(out.max_angle_deg, largest * 180.0 / M_PI);
  }
  return out;
}

std::string check_conformity(const Mesh& mesh) {
  std::ostringstream err;
  for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
    if (!(mesh.element_measure(k) > 0.0)) {
      err << "element " << k << " has nonpositive measure";
      return err.str();
    }
  }
  for (const auto& [facet, uses] : count_facets(mesh)) {
    if (uses > 2) {
      err << "facet (" << facet.first << "," << facet.second << ") shared by " << uses
          << " elements";
      return err.str();
    }
    if (uses == 1) {
      const Point m = midpoint(mesh.vertex(facet.first), mesh.vertex(facet.second));
      if (!on_domain_boundary(mesh.domain(), m)) {
        err << "facet (" << facet.first << "," << facet.second
            << ") has a single neighbour but lies inside the domain (hanging node)";
        return err.str();
      }
    }
  }
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    if (mesh.is_boundary(i) != on_domain_boundary(mesh.domain(), mesh.vertex(i))) {
      err << "vertex " << i << " boundary flag disagrees with the domain geometry";
      return err.str();
    }
  }
  return {};
}

ProlongationStencil prolong_map(const MeshPtr& coarse, const MeshPtr& fine) {
  if (!coarse || !fine) throw std::invalid_argument("prolong_map: null mesh");
  std::vector<const Mesh*> chain;  // fine, parent(fine), ..., excluding coarse
  for (const Mesh* m = fine.get(); m != coarse.get(); m = m->parent().get()) {
    if (m == nullptr || !m->refinement()) {
      throw std::invalid_argument("prolong_map: meshes are not nested");
    }
    chain.push_back(m);
  }

  ProlongationStencil stencil(coarse->num_vertices());
  for (std::size_t i = 0; i < stencil.size(); ++i) stencil[i] = {{static_cast<int>(i), 1.0}};

  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    const Mesh& level = **it;
    const auto& rec = *level.refinement();
    const std::size_t n_old = rec.parent->num_vertices();
    ProlongationStencil next(level.num_vertices());
    for (std::size_t i = 0; i < n_old; ++i) next[i] = stencil[i];
    for (std::size_t j = 0; j < rec.midpoint_parents.size(); ++j) {
      const auto [a, b] = rec.midpoint_parents[j];
      std::vector<StencilEntry> merged;
      for (const auto* src : {&stencil[a], &stencil[b]}) {
        for (const StencilEntry& s : *src) {
          auto found = std::find_if(merged.begin(), merged.end(), [&](const StencilEntry& m) {
            return m.coarse_vertex == s.coarse_vertex;
          });
          if (found == merged.end()) {
            merged.push_back({s.coarse_vertex, 0.5 * s.weight});
          } else {
            found->weight += 0.5 * s.weight;
          }
        }
      }
      std::sort(merged.begin(), merged.end(), [](const StencilEntry& x, const StencilEntry& y) {
        return x.coarse_vertex < y.coarse_vertex;
      });
      next[n_old + j] = std::move(merged);
    }
    stencil = std::move(next);
  }
  return stencil;
}

std::vector<double> prolongate(const ProlongationStencil& stencil,
                               const std::vector<double>& coarse_values) {
  std::vector<double> fine(stencil.size(), 0.0);
  for (std::size_t i = 0; i < stencil.size(); ++i) {
    double v = 0.0;
    for (const StencilEntry& s : stencil[i]) v += s.weight * coarse_values.at(s.coarse_vertex);
    fine[i] = v;
  }
  return fine;
}

void write_vtk(std::ostream& os, const Mesh& mesh,
               const std::vector<std::pair<std::string, std::vector<double>>>& point_data) {
  const int nv = mesh.vertices_per_element();
  os << "# vtk DataFile Version 3.0\n"
     << "mfgfem mesh level " << mesh.level() << "\n"
     << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << std::setprecision(17);
  os << "POINTS " << mesh.num_vertices() << " double\n";
  for (const auto& p : mesh.vertices()) os << p[0] << ' ' << p[1] << " 0\n";
  os << "CELLS " << mesh.num_elements() << ' ' << mesh.num_elements() * (nv + 1) << '\n';
  for (const auto& e : mesh.elements()) {
    os << nv;
    for (int j = 0; j < nv; ++j) os << ' ' << e[j];
    os << '\n';
  }
  os << "CELL_TYPES " << mesh.num_elements() << '\n';
  const int cell_type = mesh.dim() == 1 ? 3 : 5;  // VTK_LINE, VTK_TRIANGLE
  for (std::size_t k = 0; k < mesh.num_elements(); ++k) os << cell_type << '\n';
  if (!point_data.empty()) {
    os << "POINT_DATA " << mesh.num_vertices() << '\n';
    for (const auto& [name, values] : point_data) {
      if (values.size() != mesh.num_vertices()) {
        throw std::invalid_argument("write_vtk: point data '" + name + "' has wrong length");
      }
      os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : values) os << v << '\n';
    }
  }
}

std::string mesh_summary_header() { return "level,n_vertices,n_elements,h_max,shape_regularity"; }

std::string mesh_summary_row(const Mesh& mesh) {
  const MeshMetrics m = metrics(mesh);
  std::ostringstream os;
  os << std::setprecision(17) << mesh.level() << ',' << mesh.num_vertices() << ','
     << mesh.num_elements() << ',' << m.h_max << ',' << m.shape_regularity;
  return os.str();
}

}  // namespace mfgfem
