#include "mfgfem/fem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace mfgfem {

namespace {

using Triplet = Eigen::Triplet<double, int>;

QuadratureRule make_assembly_rule(int dim) {
  QuadratureRule r;
  if (dim == 1) {
    const double s = 0.5 / std::sqrt(3.0);
    r.barycentric = {{0.5 + s, 0.5 - s, 0.0}, {0.5 - s, 0.5 + s, 0.0}};
    r.weights = {0.5, 0.5};
  } else {
    r.barycentric = {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
    r.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  }
  return r;
}

QuadratureRule make_accurate_rule(int dim) {
  QuadratureRule r;
  if (dim == 1) {
    const double s = 0.5 * std::sqrt(0.6);
    r.barycentric = {{0.5 + s, 0.5 - s, 0.0}, {0.5, 0.5, 0.0}, {0.5 - s, 0.5 + s, 0.0}};
    r.weights = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    return r;
  }
  const double sq15 = std::sqrt(15.0);
  const double a1 = (9.0 - 2.0 * sq15) / 21.0, b1 = (6.0 + sq15) / 21.0;
  const double a2 = (9.0 + 2.0 * sq15) / 21.0, b2 = (6.0 - sq15) / 21.0;
  const double w1 = (155.0 + sq15) / 1200.0, w2 = (155.0 - sq15) / 1200.0;
  r.barycentric = {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
                   {a1, b1, b1}, {b1, a1, b1}, {b1, b1, a1},
                   {a2, b2, b2}, {b2, a2, b2}, {b2, b2, a2}};
  r.weights = {9.0 / 40.0, w1, w1, w1, w2, w2, w2};
  return r;
}

SparseOperator::Matrix from_triplets(Eigen::Index n, const std::vector<Triplet>& triplets) {
  SparseOperator::Matrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.prune(0.0, 0.0);
  m.makeCompressed();
  return m;
}

double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1]; }

}  // namespace

const QuadratureRule& assembly_rule(int dim) {
  static const QuadratureRule r1 = make_assembly_rule(1);
  static const QuadratureRule r2 = make_assembly_rule(2);
  return dim == 1 ? r1 : r2;
}

const QuadratureRule& accurate_rule(int dim) {
  static const QuadratureRule r1 = make_accurate_rule(1);
  static const QuadratureRule r2 = make_accurate_rule(2);
  return dim == 1 ? r1 : r2;
}

// ---------------------------------------------------------------------------
// P1Space

P1Space::P1Space(MeshPtr mesh) : mesh_(std::move(mesh)) {
  if (!mesh_) throw std::invalid_argument("P1Space: null mesh");
  const Mesh& m = *mesh_;
  dof_of_vertex_.assign(m.num_vertices(), -1);
  for (std::size_t v = 0; v < m.num_vertices(); ++v) {
    if (!m.is_boundary(v)) {
      dof_of_vertex_[v] = static_cast<int>(interior_.size());
      interior_.push_back(static_cast<int>(v));
    }
  }
  measure_.resize(m.num_elements());
  grads_.resize(m.num_elements());
  for (std::size_t k = 0; k < m.num_elements(); ++k) {
    const double area = m.element_measure(k);
    if (!(area > 0.0)) throw std::invalid_argument("P1Space: degenerate element");
    measure_[k] = area;
    const auto& e = m.element(k);
    if (m.dim() == 1) {
      grads_[k] = {Point{-1.0 / area, 0.0}, Point{1.0 / area, 0.0}, Point{0.0, 0.0}};
      continue;
    }
    const Point& a = m.vertex(e[0]);
    const Point& b = m.vertex(e[1]);
    const Point& c = m.vertex(e[2]);
    const double s = 1.0 / (2.0 * area);
    grads_[k] = {Point{(b[1] - c[1]) * s, (c[0] - b[0]) * s},
                 Point{(c[1] - a[1]) * s, (a[0] - c[0]) * s},
                 Point{(a[1] - b[1]) * s, (b[0] - a[0]) * s}};
  }
}

Point P1Space::quad_point(std::size_t element, std::size_t q) const {
  const auto& e = mesh_->element(element);
  const auto& bary = rule().barycentric[q];
  Point x{0.0, 0.0};
  for (int j = 0; j <= dim(); ++j) {
    const Point& v = mesh_->vertex(e[j]);
    x[0] += bary[j] * v[0];
    x[1] += bary[j] * v[1];
  }
  return x;
}

std::vector<Point> P1Space::quad_points() const {
  std::vector<Point> pts;
  pts.reserve(num_quad_points());
  for (std::size_t k = 0; k < num_elements(); ++k) {
    for (std::size_t q = 0; q < quad_per_element(); ++q) pts.push_back(quad_point(k, q));
  }
  return pts;
}

Vec P1Space::full_vector(const Vec& interior_values) const {
  if (static_cast<std::size_t>(interior_values.size()) != n_dofs()) {
    throw std::invalid_argument("P1Space::full_vector: size mismatch");
  }
  Vec full = Vec::Zero(static_cast<Eigen::Index>(mesh_->num_vertices()));
  for (std::size_t i = 0; i < interior_.size(); ++i) full[interior_[i]] = interior_values[i];
  return full;
}

Vec P1Space::restrict_to_interior(const Vec& full_values) const {
  Vec out(static_cast<Eigen::Index>(n_dofs()));
  for (std::size_t i = 0; i < interior_.size(); ++i) out[i] = full_values[interior_[i]];
  return out;
}

Point P1Space::gradient(const Vec& interior_values, std::size_t element) const {
  Point g{0.0, 0.0};
  const auto& grads = grads_[element];
  for (int j = 0; j <= dim(); ++j) {
    const int dof = local_dof(element, j);
    if (dof < 0) continue;
    g[0] += interior_values[dof] * grads[j][0];
    g[1] += interior_values[dof] * grads[j][1];
  }
  return g;
}

Vec P1Space::interpolate(const ScalarField& f) const {
  Vec out(static_cast<Eigen::Index>(n_dofs()));
  for (std::size_t i = 0; i < interior_.size(); ++i) out[i] = f(mesh_->vertex(interior_[i]));
  return out;
}

// ---------------------------------------------------------------------------
// SparseOperator

SparseOperator::SparseOperator(Matrix matrix, bool symmetric, std::optional<Vec> boundary_row_sums)
    : matrix_(std::move(matrix)), symmetric_(symmetric), boundary_row_sums_(std::move(boundary_row_sums)) {
  if (matrix_.rows() != matrix_.cols()) throw std::invalid_argument("SparseOperator: not square");
  if (boundary_row_sums_ && boundary_row_sums_->size() != matrix_.rows()) {
    throw std::invalid_argument("SparseOperator: boundary row sums have wrong length");
  }
}

SparseOperator SparseOperator::transpose() const {
  Matrix t = matrix_.transpose();
  t.makeCompressed();
  return SparseOperator(std::move(t), symmetric_);
}

SparseOperator operator+(const SparseOperator& a, const SparseOperator& b) {
  if (a.size() != b.size()) throw std::invalid_argument("SparseOperator: dimension mismatch");
  SparseOperator::Matrix sum = a.matrix_ + b.matrix_;
  sum.prune(0.0, 0.0);
  sum.makeCompressed();
  std::optional<Vec> rows;
  if (a.boundary_row_sums_ && b.boundary_row_sums_) rows = *a.boundary_row_sums_ + *b.boundary_row_sums_;
  return SparseOperator(std::move(sum), a.symmetric_ && b.symmetric_, std::move(rows));
}

// ---------------------------------------------------------------------------
// Stabilization

std::string_view to_string(StabilizationMode mode) {
  switch (mode) {
    case StabilizationMode::None: return "none";
    case StabilizationMode::Isotropic: return "isotropic";
    case StabilizationMode::EdgeAligned: return "edge_aligned";
  }
  return "unknown";
}

std::optional<StabilizationMode> parse_stabilization_mode(std::string_view name) {
  if (name == "none") return StabilizationMode::None;
  if (name == "isotropic") return StabilizationMode::Isotropic;
  if (name == "edge_aligned") return StabilizationMode::EdgeAligned;
  return std::nullopt;
}

double Stabilization::frobenius_constant() const {
  const double base = sigma * lipschitz;
  switch (mode) {
    case StabilizationMode::None: return 0.0;
    case StabilizationMode::Isotropic: return base * std::sqrt(static_cast<double>(dim));
    case StabilizationMode::EdgeAligned: return base * (dim == 1 ? 1.0 : std::sqrt(10.0));
  }
  return 0.0;
}

Stabilization build_stabilization(const P1Space& space, double lipschitz, double sigma,
                                  StabilizationMode mode) {
  if (sigma < 0.0) throw std::invalid_argument("build_stabilization: sigma must be >= 0");
  if (lipschitz < 0.0) throw std::invalid_argument("build_stabilization: L_H must be >= 0");
  Stabilization s;
  s.mode = mode;
  s.sigma = sigma;
  s.lipschitz = lipschitz;
  s.dim = space.dim();
  const Mesh& mesh = space.mesh();
  s.d_per_element.assign(mesh.num_elements(), 0.0);
  s.tensor_per_element.assign(mesh.num_elements(), Eigen::Matrix2d::Zero());
  if (mode == StabilizationMode::None) return s;
  for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
    const double d = sigma * lipschitz * mesh.element_diameter(k);
    s.d_per_element[k] = d;
    Eigen::Matrix2d t = Eigen::Matrix2d::Identity();
    if (mode == StabilizationMode::EdgeAligned && mesh.dim() == 2) {
      const auto& e = mesh.element(k);
      double longest = -1.0;
      Eigen::Vector2d tangent;
      for (int j = 0; j < 3; ++j) {
        const Point& a = mesh.vertex(e[j]);
        const Point& b = mesh.vertex(e[(j + 1) % 3]);
        const Eigen::Vector2d edge(b[0] - a[0], b[1] - a[1]);
        if (edge.norm() > longest) {
          longest = edge.norm();
          tangent = edge / longest;
        }
      }
      t += 2.0 * tangent * tangent.transpose();
    }
    if (mesh.dim() == 1) t(1, 1) = 0.0;
    s.tensor_per_element[k] = d * t;
  }
  return s;
}

Stabilization no_stabilization(const P1Space& space) {
  return build_stabilization(space, 0.0, 0.0, StabilizationMode::None);
}

// ---------------------------------------------------------------------------
// Assembly

SparseOperator assemble_stiffness(const P1Space& space, double nu, const Stabilization& stab) {
  if (!(nu > 0.0)) throw std::invalid_argument("assemble_stiffness: nu must be positive");
  const Mesh& mesh = space.mesh();
  if (stab.tensor_per_element.size() != mesh.num_elements()) {
    throw std::invalid_argument("assemble_stiffness: stabilization built for another mesh");
  }
  const int nl = space.dim() + 1;
  const auto n = static_cast<Eigen::Index>(space.n_dofs());
  std::vector<Triplet> triplets;
  triplets.reserve(mesh.num_elements() * nl * nl);
  Vec boundary = Vec::Zero(n);

  for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
    const double area = mesh.element_measure(k);
    if (!(area > 0.0)) throw std::invalid_argument("assemble_stiffness: degenerate element");
    Eigen::Matrix2d a = stab.tensor(k);
    a(0, 0) += nu;
    if (space.dim() == 2) a(1, 1) += nu;
    const auto& g = space.gradients(k);
    double local[3][3];
    for (int i = 0; i < nl; ++i) {
      const Eigen::Vector2d gi(g[i][0], g[i][1]);
      for (int j = i; j < nl; ++j) {
        const Eigen::Vector2d gj(g[j][0], g[j][1]);
        local[i][j] = area * gi.dot(a * gj);
        local[j][i] = local[i][j];
      }
    }
    for (int i = 0; i < nl; ++i) {
      const int row = space.local_dof(k, i);
      if (row < 0) continue;
      for (int j = 0; j < nl; ++j) {
        const int col = space.local_dof(k, j);
        if (col < 0) {
          boundary[row] += local[i][j];
        } else {
          triplets.emplace_back(row, col, local[i][j]);
        }
      }
    }
  }
  return SparseOperator(from_triplets(n, triplets), true, std::move(boundary));
}

SparseOperator assemble_mass(const P1Space& space) {
  const Mesh& mesh = space.mesh();
  const int nl = space.dim() + 1;
  const auto n = static_cast<Eigen::Index>(space.n_dofs());
  const QuadratureRule& rule = space.rule();
  std::vector<Triplet> triplets;
  triplets.reserve(mesh.num_elements() * nl * nl);
  Vec boundary = Vec::Zero(n);
  for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
    const double area = space.measure(k);
    for (int i = 0; i < nl; ++i) {
      const int row = space.local_dof(k, i);
      if (row < 0) continue;
      for (int j = 0; j < nl; ++j) {
        double v = 0.0;
        for (std::size_t q = 0; q < rule.size(); ++q) {
          v += rule.weights[q] * rule.barycentric[q][i] * rule.barycentric[q][j];
        }
        v *= area;
        const int col = space.local_dof(k, j);
        if (col < 0) {
          boundary[row] += v;
        } else {
          triplets.emplace_back(row, col, v);
        }
      }
    }
  }
  return SparseOperator(from_triplets(n, triplets), true, std::move(boundary));
}

SparseOperator assemble_convection(const P1Space& space, const DriftSamples& drift,
                                   std::optional<double> bound) {
  const Mesh& mesh = space.mesh();
  const std::size_t nq = space.quad_per_element();
  if (static_cast<std::size_t>(drift.cols()) != space.num_quad_points()) {
    throw std::invalid_argument("assemble_convection: drift must have one column per quadrature point");
  }
  if (bound) {
    const double worst = drift.colwise().norm().maxCoeff();
    if (worst > *bound * (1.0 + 1e-12)) {
      spdlog::warn("assemble_convection: drift magnitude {:.6g} exceeds L_H = {:.6g}", worst, *bound);
    }
  }
  const int nl = space.dim() + 1;
  const auto n = static_cast<Eigen::Index>(space.n_dofs());
  const QuadratureRule& rule = space.rule();
  std::vector<Triplet> triplets;
  triplets.reserve(mesh.num_elements() * nl * nl);
  Vec boundary = Vec::Zero(n);
  for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
    const double area = space.measure(k);
    const auto& g = space.gradients(k);
    for (int i = 0; i < nl; ++i) {
      const int row = space.local_dof(k, i);
      if (row < 0) continue;
      for (int j = 0; j < nl; ++j) {
        double v = 0.0;
        for (std::size_t q = 0; q < nq; ++q) {
          const auto b = drift.col(static_cast<Eigen::Index>(k * nq + q));
          v += rule.weights[q] * rule.barycentric[q][i] * (b[0] * g[j][0] + b[1] * g[j][1]);
        }
        v *= area;
        const int col = space.local_dof(k, j);
        if (col < 0) {
          boundary[row] += v;
        } else {
          triplets.emplace_back(row, col, v);
        }
      }
    }
  }
  return SparseOperator(from_triplets(n, triplets), false, std::move(boundary));
}

Eigen::MatrixXd assemble_convection_full_rows(const P1Space& space, const DriftSamples& drift) {
  const Mesh& mesh = space.mesh();
  const std::size_t nq = space.quad_per_element();
  const int nl = space.dim() + 1;
  const QuadratureRule& rule = space.rule();
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(space.n_dofs()),
                                               static_cast<Eigen::Index>(mesh.num_vertices()));
  for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
    const auto& g = space.gradients(k);
    const auto& e = mesh.element(k);
    for (int i = 0; i < nl; ++i) {
      const int row = space.local_dof(k, i);
      if (row < 0) continue;
      for (int j = 0; j < nl; ++j) {
        double v = 0.0;
        for (std::size_t q = 0; q < nq; ++q) {
          const auto b = drift.col(static_cast<Eigen::Index>(k * nq + q));
          v += rule.weights[q] * rule.barycentric[q][i] * (b[0] * g[j][0] + b[1] * g[j][1]);
        }
        full(row, e[j]) += space.measure(k) * v;
      }
    }
  }
  return full;
}

SparseOperator kfp_operator(const SparseOperator& stiffness, const SparseOperator& convection) {
  if (stiffness.size() != convection.size()) {
    throw std::invalid_argument("kfp_operator: dimension mismatch");
  }
  SparseOperator::Matrix sum = stiffness.matrix() + SparseOperator::Matrix(convection.matrix().transpose());
  sum.prune(0.0, 0.0);
  sum.makeCompressed();
  return SparseOperator(std::move(sum), false);
}

namespace {

Vec load_over_vertices(const P1Space& space, const ScalarField& g0, const VectorField& g1,
                       bool interior_only) {
  const Mesh& mesh = space.mesh();
  const int nl = space.dim() + 1;
  const QuadratureRule& rule = space.rule();
  Vec out = Vec::Zero(static_cast<Eigen::Index>(interior_only ? space.n_dofs() : mesh.num_vertices()));
  for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
    const auto& g = space.gradients(k);
    const auto& e = mesh.element(k);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Point x = space.quad_point(k, q);
      const double w = space.quad_weight(k, q);
      const double s0 = g0 ? g0(x) : 0.0;
      const Point s1 = g1 ? g1(x) : Point{0.0, 0.0};
      for (int i = 0; i < nl; ++i) {
        const int row = interior_only ? space.local_dof(k, i) : e[i];
        if (row < 0) continue;
        out[row] += w * (s0 * rule.barycentric[q][i] + dot(s1, g[i]));
      }
    }
  }
  return out;
}

}  // namespace

Vec assemble_load_G(const P1Space& space, const ScalarField& g0, const VectorField& g1) {
  return load_over_vertices(space, g0, g1, true);
}

Vec assemble_load_all_vertices(const P1Space& space, const ScalarField& g0, const VectorField& g1) {
  return load_over_vertices(space, g0, g1, false);
}

Vec assemble_quadrature_load(const P1Space& space, const Vec& samples) {
  const std::size_t nq = space.quad_per_element();
  if (static_cast<std::size_t>(samples.size()) != space.num_quad_points()) {
    throw std::invalid_argument("assemble_quadrature_load: wrong number of samples");
  }
  const int nl = space.dim() + 1;
  const QuadratureRule& rule = space.rule();
  Vec out = Vec::Zero(static_cast<Eigen::Index>(space.n_dofs()));
  for (std::size_t k = 0; k < space.num_elements(); ++k) {
    const double area = space.measure(k);
    for (int i = 0; i < nl; ++i) {
      const int row = space.local_dof(k, i);
      if (row < 0) continue;
      double v = 0.0;
      for (std::size_t q = 0; q < nq; ++q) {
        v += rule.weights[q] * rule.barycentric[q][i] * samples[static_cast<Eigen::Index>(k * nq + q)];
      }
      out[row] += area * v;
    }
  }
  return out;
}

Vec sample_at_quadrature(const P1Space& space, const Vec& interior_values) {
  const std::size_t nq = space.quad_per_element();
  const int nl = space.dim() + 1;
  const QuadratureRule& rule = space.rule();
  Vec out(static_cast<Eigen::Index>(space.num_quad_points()));
  for (std::size_t k = 0; k < space.num_elements(); ++k) {
    for (std::size_t q = 0; q < nq; ++q) {
      double v = 0.0;
      for (int j = 0; j < nl; ++j) {
        const int dof = space.local_dof(k, j);
        if (dof >= 0) v += rule.barycentric[q][j] * interior_values[dof];
      }
      out[static_cast<Eigen::Index>(k * nq + q)] = v;
    }
  }
  return out;
}

DriftSamples constant_drift(const P1Space& space, const Point& b) {
  DriftSamples d(2, static_cast<Eigen::Index>(space.num_quad_points()));
  d.row(0).setConstant(b[0]);
  d.row(1).setConstant(space.dim() == 1 ? 0.0 : b[1]);
  return d;
}

// ---------------------------------------------------------------------------
// DMP

std::string DmpReport::summary() const {
  std::ostringstream os;
  os << (passed() ? "pass" : "FAIL") << " (offdiag " << (offdiag_ok ? "ok" : "violated")
     << ", max " << worst_offdiag << " at (" << offdiag_row << "," << offdiag_col << "); diagonal "
     << (diagonal_ok ? "ok" : "violated") << ", min " << min_diagonal << "; row sums "
     << (rowsum_ok ? "ok" : "violated") << ", min " << min_rowsum << "; tol " << tolerance << ")";
  return os.str();
}

DmpReport verify_dmp(const SparseOperator& op, const P1Space& space, double rel_tol) {
  if (static_cast<std::size_t>(op.size()) != space.n_dofs()) {
    throw std::invalid_argument("verify_dmp: operator does not match the space");
  }
  if (!op.boundary_row_sums()) {
    throw std::invalid_argument(
        "verify_dmp: operator lacks boundary row sums (check the un-transposed operator)");
  }
  const auto& m = op.matrix();
  const Vec& boundary = *op.boundary_row_sums();
  DmpReport r;
  double max_diag = 0.0;
  for (Eigen::Index i = 0; i < m.outerSize(); ++i) max_diag = std::max(max_diag, std::abs(m.coeff(i, i)));
  r.tolerance = rel_tol * std::max(max_diag, 1e-300);
  r.worst_offdiag = -std::numeric_limits<double>::infinity();
  r.min_diagonal = std::numeric_limits<double>::infinity();
  r.min_rowsum = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
    double diag = 0.0;
    double rowsum = boundary[i];
    for (SparseOperator::Matrix::InnerIterator it(m, i); it; ++it) {
      rowsum += it.value();
      if (it.col() == i) {
        diag = it.value();
      } else if (it.value() > r.worst_offdiag) {
        r.worst_offdiag = it.value();
        r.offdiag_row = i;
        r.offdiag_col = it.col();
      }
    }
    if (diag < r.min_diagonal) {
      r.min_diagonal = diag;
      r.diagonal_row = i;
    }
    if (rowsum < r.min_rowsum) {
      r.min_rowsum = rowsum;
      r.rowsum_row = i;
    }
  }
  if (m.rows() == 0) {
    r.worst_offdiag = r.min_diagonal = r.min_rowsum = 0.0;
    return r;
  }
  r.offdiag_ok = r.worst_offdiag <= r.tolerance || r.offdiag_row < 0;
  r.diagonal_ok = r.min_diagonal > 0.0;
  r.rowsum_ok = r.min_rowsum >= -r.tolerance;
  if (r.offdiag_row < 0) r.worst_offdiag = 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Norms and errors

double l2_norm(const P1Space& space, const Vec& values) {
  const Vec full = space.full_vector(values);
  const QuadratureRule& rule = space.rule();
  const int nl = space.dim() + 1;
  double sum = 0.0;
  for (std::size_t k = 0; k < space.num_elements(); ++k) {
    const auto& e = space.mesh().element(k);
    double local = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      double v = 0.0;
      for (int j = 0; j < nl; ++j) v += rule.barycentric[q][j] * full[e[j]];
      local += rule.weights[q] * v * v;
    }
    sum += space.measure(k) * local;
  }
  return std::sqrt(sum);
}

double h1_seminorm(const P1Space& space, const Vec& values) {
  double sum = 0.0;
  for (std::size_t k = 0; k < space.num_elements(); ++k) {
    const Point g = space.gradient(values, k);
    sum += space.measure(k) * dot(g, g);
  }
  return std::sqrt(sum);
}

double h1_norm(const P1Space& space, const Vec& values) {
  return std::hypot(l2_norm(space, values), h1_seminorm(space, values));
}

double l2_norm(const NodalField& field) { return l2_norm(*field.space, field.values); }
double h1_norm(const NodalField& field) { return h1_norm(*field.space, field.values); }

Vec prolong_field(const P1Space& coarse, const P1Space& fine, const Vec& coarse_values) {
  const ProlongationStencil stencil = prolong_map(coarse.mesh_ptr(), fine.mesh_ptr());
  const Vec full = coarse.full_vector(coarse_values);
  Vec fine_full(static_cast<Eigen::Index>(stencil.size()));
  for (std::size_t i = 0; i < stencil.size(); ++i) {
    double v = 0.0;
    for (const StencilEntry& s : stencil[i]) v += s.weight * full[s.coarse_vertex];
    fine_full[static_cast<Eigen::Index>(i)] = v;
  }
  return fine.restrict_to_interior(fine_full);
}

FieldError error_between(const NodalField& coarse, const NodalField& fine) {
  if (!coarse.space || !fine.space) throw std::invalid_argument("error_between: field without space");
  const Vec diff = prolong_field(*coarse.space, *fine.space, coarse.values) - fine.values;
  FieldError e;
  e.l2 = l2_norm(*fine.space, diff);
  e.h1 = std::hypot(e.l2, h1_seminorm(*fine.space, diff));
  return e;
}

FieldError error_to_exact(const P1Space& space, const Vec& values, const ScalarField& exact,
                          const VectorField& exact_gradient) {
  const Vec full = space.full_vector(values);
  const QuadratureRule& rule = accurate_rule(space.dim());
  const int nl = space.dim() + 1;
  double l2 = 0.0, semi = 0.0;
  for (std::size_t k = 0; k < space.num_elements(); ++k) {
    const auto& e = space.mesh().element(k);
    const Point gh = space.gradient(values, k);
    double lk = 0.0, sk = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      Point x{0.0, 0.0};
      double uh = 0.0;
      for (int j = 0; j < nl; ++j) {
        const Point& v = space.mesh().vertex(e[j]);
        x[0] += rule.barycentric[q][j] * v[0];
        x[1] += rule.barycentric[q][j] * v[1];
        uh += rule.barycentric[q][j] * full[e[j]];
      }
      const double du = exact(x) - uh;
      Point ge = exact_gradient(x);
      if (space.dim() == 1) ge[1] = 0.0;
      const double gx = ge[0] - gh[0], gy = ge[1] - gh[1];
      lk += rule.weights[q] * du * du;
      sk += rule.weights[q] * (gx * gx + gy * gy);
    }
    l2 += space.measure(k) * lk;
    semi += space.measure(k) * sk;
  }
  FieldError err;
  err.l2 = std::sqrt(l2);
  err.h1 = std::sqrt(l2 + semi);
  return err;
}

}  // namespace mfgfem
