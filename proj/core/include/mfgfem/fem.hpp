#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "mfgfem/fields.hpp"
#include "mfgfem/mesh.hpp"

namespace mfgfem {

using Vec = Eigen::VectorXd;
/// Vector samples at quadrature points, one column per point. Row 1 is zero in 1D.
using DriftSamples = Eigen::Matrix2Xd;

/// Quadrature on the reference simplex in barycentric coordinates. Weights sum to 1
/// and are scaled by the element measure when used.
struct QuadratureRule {
  std::vector<std::array<double, 3>> barycentric;
  std::vector<double> weights;
  std::size_t size() const { return weights.size(); }
};

/// Degree-2 exact rule used by all assembly: edge midpoints in 2D, 2-point Gauss in 1D.
const QuadratureRule& assembly_rule(int dim);
/// Degree-5 exact rule (7-point triangle rule, 3-point Gauss) for errors against
/// analytic functions.
const QuadratureRule& accurate_rule(int dim);

/// Continuous piecewise-affine functions vanishing on the boundary. Degrees of
/// freedom are the interior vertices in ascending vertex order.
class P1Space {
 public:
  explicit P1Space(MeshPtr mesh);

  const Mesh& mesh() const { return *mesh_; }
  const MeshPtr& mesh_ptr() const { return mesh_; }
  int dim() const { return mesh_->dim(); }
  std::size_t n_dofs() const { return interior_.size(); }
  std::size_t num_elements() const { return mesh_->num_elements(); }
  const std::vector<int>& interior_dofs() const { return interior_; }
  /// -1 for boundary vertices.
  int dof_of_vertex(std::size_t v) const { return dof_of_vertex_[v]; }
  int local_dof(std::size_t element, int local) const {
    return dof_of_vertex_[mesh_->element(element)[local]];
  }

  double measure(std::size_t element) const { return measure_[element]; }
  /// Gradients of the barycentric coordinates of `element`.
  const std::array<Point, 3>& gradients(std::size_t element) const { return grads_[element]; }

  const QuadratureRule& rule() const { return assembly_rule(dim()); }
  std::size_t quad_per_element() const { return rule().size(); }
  std::size_t num_quad_points() const { return num_elements() * quad_per_element(); }
  Point quad_point(std::size_t element, std::size_t q) const;
  double quad_weight(std::size_t element, std::size_t q) const {
    return measure_[element] * rule().weights[q];
  }
  std::vector<Point> quad_points() const;

  /// Values at every vertex (zero on the boundary).
  Vec full_vector(const Vec& interior_values) const;
  Vec restrict_to_interior(const Vec& full_values) const;
  /// Constant gradient of the P1 function on one element.
  Point gradient(const Vec& interior_values, std::size_t element) const;
  /// Nodal interpolation of a function into the space (boundary values dropped).
  Vec interpolate(const ScalarField& f) const;

 private:
  MeshPtr mesh_;
  std::vector<int> interior_;
  std::vector<int> dof_of_vertex_;
  std::vector<double> measure_;
  std::vector<std::array<Point, 3>> grads_;
};

using SpacePtr = std::shared_ptr<const P1Space>;

/// Coefficient vector over interior dofs.
struct NodalField {
  SpacePtr space;
  Vec values;
};

/// Square sparse matrix over interior dofs in compressed-row form.
class SparseOperator {
 public:
  using Matrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

  SparseOperator() = default;
  /// `boundary_row_sums` holds, for each row, the sum of the entries that fell into
  /// eliminated boundary columns during assembly.
  SparseOperator(Matrix matrix, bool symmetric, std::optional<Vec> boundary_row_sums = {});

  Eigen::Index size() const { return matrix_.rows(); }
  const Matrix& matrix() const { return matrix_; }
  bool symmetric() const { return symmetric_; }
  const std::optional<Vec>& boundary_row_sums() const { return boundary_row_sums_; }
  double coeff(Eigen::Index i, Eigen::Index j) const { return matrix_.coeff(i, j); }

  Vec apply(const Vec& x) const { return matrix_ * x; }
  SparseOperator transpose() const;

  friend SparseOperator operator+(const SparseOperator& a, const SparseOperator& b);

 private:
  Matrix matrix_;
  bool symmetric_ = false;
  std::optional<Vec> boundary_row_sums_;
};

enum class StabilizationMode {
  None,
  /// D_K = d_K I.
  Isotropic,
  /// D_K = d_K (I + 2 t t^T) with t the unit tangent of the longest edge of K.
  /// Needed on right-angled triangles, where any multiple of I gives no coupling
  /// across the hypotenuse. Coincides with Isotropic in 1D.
  EdgeAligned,
};

std::string_view to_string(StabilizationMode mode);
std::optional<StabilizationMode> parse_stabilization_mode(std::string_view name);

/// Artificial diffusion D_K with scale d_K = sigma * L_H * h_K per element.
struct Stabilization {
  StabilizationMode mode = StabilizationMode::None;
  double sigma = 0.0;
  double lipschitz = 0.0;
  int dim = 2;
  std::vector<double> d_per_element;
  std::vector<Eigen::Matrix2d> tensor_per_element;

  const Eigen::Matrix2d& tensor(std::size_t element) const { return tensor_per_element[element]; }
  /// Constant C with |D_K|_F <= C h_K for every element.
  double frobenius_constant() const;
};

Stabilization build_stabilization(const P1Space& space, double lipschitz, double sigma,
                                  StabilizationMode mode = StabilizationMode::EdgeAligned);
Stabilization no_stabilization(const P1Space& space);

/// (A_K grad xi_j, grad xi_i) with A_K = nu I + D_K. Throws on degenerate elements.
SparseOperator assemble_stiffness(const P1Space& space, double nu, const Stabilization& stab);
/// (xi_j, xi_i), exact.
SparseOperator assemble_mass(const P1Space& space);
/// (b . grad xi_j, xi_i). `drift` has one column per quadrature point. When `bound`
/// is given, samples with |b| > bound are reported through the log.
SparseOperator assemble_convection(const P1Space& space, const DriftSamples& drift,
                                   std::optional<double> bound = std::nullopt);
/// Convection rows over all vertices (interior rows x all vertex columns).
Eigen::MatrixXd assemble_convection_full_rows(const P1Space& space, const DriftSamples& drift);
/// stiffness + convection^T: the adjoint operator acting on the density.
SparseOperator kfp_operator(const SparseOperator& stiffness, const SparseOperator& convection);

/// (g0, xi_i) + (g1, grad xi_i) over interior dofs.
Vec assemble_load_G(const P1Space& space, const ScalarField& g0, const VectorField& g1);
/// Same pairing against every vertex basis function.
Vec assemble_load_all_vertices(const P1Space& space, const ScalarField& g0, const VectorField& g1);
/// (f, xi_i) for values given at quadrature points (element-major).
Vec assemble_quadrature_load(const P1Space& space, const Vec& samples);

/// Field values at quadrature points (element-major).
Vec sample_at_quadrature(const P1Space& space, const Vec& interior_values);
DriftSamples constant_drift(const P1Space& space, const Point& b);

struct DmpReport {
  bool offdiag_ok = true;
  bool diagonal_ok = true;
  bool rowsum_ok = true;
  double worst_offdiag = 0.0;  // largest off-diagonal entry
  Eigen::Index offdiag_row = -1;
  Eigen::Index offdiag_col = -1;
  double min_diagonal = 0.0;
  Eigen::Index diagonal_row = -1;
  double min_rowsum = 0.0;  // over full rows, boundary columns included
  Eigen::Index rowsum_row = -1;
  double tolerance = 0.0;

  bool passed() const { return offdiag_ok && diagonal_ok && rowsum_ok; }
  std::string summary() const;
};

/// M-matrix sufficient conditions for the discrete maximum principle. The operator
/// must carry its boundary row sums (any assembled operator and their sums do).
DmpReport verify_dmp(const SparseOperator& op, const P1Space& space, double rel_tol = 1e-12);

double l2_norm(const P1Space& space, const Vec& values);
double h1_seminorm(const P1Space& space, const Vec& values);
/// Full norm sqrt(|v|^2 + |grad v|^2).
double h1_norm(const P1Space& space, const Vec& values);
double l2_norm(const NodalField& field);
double h1_norm(const NodalField& field);

struct FieldError {
  double l2 = 0.0;
  double h1 = 0.0;  // full H1 norm of the difference
};

/// Prolongs the coarse field exactly onto the fine mesh and measures the difference
/// there. Throws if the meshes are not nested.
FieldError error_between(const NodalField& coarse, const NodalField& fine);
/// Coarse field expressed in the fine space.
Vec prolong_field(const P1Space& coarse, const P1Space& fine, const Vec& coarse_values);
/// Error against an analytic function and its gradient (degree-5 quadrature).
FieldError error_to_exact(const P1Space& space, const Vec& values, const ScalarField& exact,
                          const VectorField& exact_gradient);

/// vertex_id,x,y,value over all vertices.
void write_field_csv(std::ostream& os, const P1Space& space, const Vec& values);
void write_field_vtk(std::ostream& os, const P1Space& space,
                     const std::vector<std::pair<std::string, Vec>>& fields);

}  // namespace mfgfem
