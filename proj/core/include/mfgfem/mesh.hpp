#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mfgfem {

/// Coordinates of a mesh vertex. One-dimensional meshes keep y = 0.
using Point = std::array<double, 2>;

enum class DomainTag { UnitInterval, UnitSquare, LShape };

std::string_view to_string(DomainTag tag);
/// Accepts "unit_interval", "unit_square", "lshape" (and a few spellings).
std::optional<DomainTag> parse_domain_tag(std::string_view name);
int domain_dimension(DomainTag tag);

class Mesh;
using MeshPtr = std::shared_ptr<const Mesh>;

/// How a refined mesh relates to the mesh it was refined from. Vertices of the
/// parent keep their indices; every appended vertex is the midpoint of a parent
/// edge.
struct RefinementRecord {
  MeshPtr parent;
  std::vector<std::pair<int, int>> midpoint_parents;  // one per new vertex
  std::vector<int> parent_element;                    // one per fine element
};

/// Conforming simplicial mesh of an interval or polygon. Immutable once built.
class Mesh {
 public:
  Mesh(int dim, DomainTag tag, std::vector<Point> vertices,
       std::vector<std::array<int, 3>> elements, int level = 0,
       std::optional<RefinementRecord> refinement = std::nullopt);

  int dim() const { return dim_; }
  DomainTag domain() const { return tag_; }
  int level() const { return level_; }
  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_elements() const { return elements_.size(); }
  /// Vertices per element (d + 1).
  int vertices_per_element() const { return dim_ + 1; }

  const std::vector<Point>& vertices() const { return vertices_; }
  const Point& vertex(std::size_t i) const { return vertices_[i]; }
  /// Entries beyond d + 1 are unused (-1).
  const std::vector<std::array<int, 3>>& elements() const { return elements_; }
  const std::array<int, 3>& element(std::size_t k) const { return elements_[k]; }
  const std::vector<bool>& boundary_flags() const { return boundary_; }
  bool is_boundary(std::size_t i) const { return boundary_[i]; }
  std::size_t num_interior_vertices() const;

  /// Signed measure (length in 1D, area in 2D).
  double element_measure(std::size_t k) const;
  double element_diameter(std::size_t k) const;

  const std::optional<RefinementRecord>& refinement() const { return refinement_; }
  MeshPtr parent() const { return refinement_ ? refinement_->parent : nullptr; }

 private:
  void mark_boundary();

  int dim_;
  DomainTag tag_;
  std::vector<Point> vertices_;
  std::vector<std::array<int, 3>> elements_;
  std::vector<bool> boundary_;
  int level_;
  std::optional<RefinementRecord> refinement_;
};

struct MeshMetrics {
  double h_max = 0.0;
  std::vector<double> h_per_element;
  /// max over elements of diameter / inradius.
  double shape_regularity = 0.0;
  /// Largest interior angle in degrees; 0 for 1D meshes.
  double max_angle_deg = 0.0;
};

/// Structured mesh with n subdivisions per side. Squares are split by the
/// diagonal running from the lower-right to the upper-left corner of each cell.
/// The L-shape is [0,1]^2 minus (1/2,1]^2 and needs an even n.
MeshPtr build_structured(DomainTag tag, int n);

/// Coarsest mesh of the level hierarchy, refined `level` times.
MeshPtr build_level(DomainTag tag, int level);

/// Red refinement in 2D (four children through the edge midpoints), bisection in 1D.
MeshPtr refine_uniform(const MeshPtr& mesh);

MeshMetrics metrics(const Mesh& mesh);

/// Checks positive measure, conformity (every interior facet shared by exactly two
/// elements, boundary facets on the domain boundary) and boundary flags.
/// Returns an empty string when the mesh is valid, a description otherwise.
std::string check_conformity(const Mesh& mesh);

/// True when x lies on the boundary of the reference domain.
bool on_domain_boundary(DomainTag tag, const Point& x, double tol = 1e-12);

/// Interpolation stencil for one fine vertex: coarse vertex indices and weights.
struct StencilEntry {
  int coarse_vertex;
  double weight;
};
using ProlongationStencil = std::vector<std::vector<StencilEntry>>;

/// Per-fine-vertex P1 interpolation weights in terms of coarse vertices.
/// Throws std::invalid_argument if `fine` is not an iterated refinement of `coarse`.
ProlongationStencil prolong_map(const MeshPtr& coarse, const MeshPtr& fine);

/// Applies a stencil to a vector of coarse vertex values.
std::vector<double> prolongate(const ProlongationStencil& stencil,
                               const std::vector<double>& coarse_values);

/// Legacy ASCII VTK unstructured grid. Point data is optional (one value per vertex).
void write_vtk(std::ostream& os, const Mesh& mesh,
               const std::vector<std::pair<std::string, std::vector<double>>>& point_data = {});

/// CSV header/row pair: level,n_vertices,n_elements,h_max,shape_regularity
std::string mesh_summary_header();
std::string mesh_summary_row(const Mesh& mesh);

}  // namespace mfgfem
