#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mfgfem {

/// Small fixed-capacity vector for points and gradients in up to three dimensions.
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;

/// One control of the finite family: drift b(x) and running cost f(x).
struct Control {
  std::function<SmallVec(const SmallVec&)> drift;
  std::function<double(const SmallVec&)> cost;
  bool constant = false;
  SmallVec drift_value;  // valid when constant
  double cost_value = 0.0;

  static Control make_constant(const SmallVec& b, double f);
};

struct HamiltonianValue {
  double value;
  int argmax_index;
};

/// H(x, p) = max_i { b_i(x) . p - f_i(x) } over a finite control family.
class PolyhedralHamiltonian {
 public:
  /// L_H is max_i |b_i|, exact for constant controls and otherwise sampled on a
  /// 64^d grid of the unit box and inflated by 1.01.
  PolyhedralHamiltonian(int dim, std::vector<Control> controls);

  /// Controls given as constant (b_i, f_i) pairs.
  static PolyhedralHamiltonian constant(int dim, const std::vector<SmallVec>& drifts,
                                        const std::vector<double>& costs);
  /// H(p) = |p| in one dimension: controls +1 and -1 with zero cost.
  static PolyhedralHamiltonian absolute_value();
  /// H(p) = max(|p_1|, ..., |p_d|): controls +-e_k with zero cost.
  static PolyhedralHamiltonian max_norm(int dim);

  int dim() const { return dim_; }
  std::size_t size() const { return controls_.size(); }
  const std::vector<Control>& controls() const { return controls_; }
  double lipschitz() const { return lipschitz_; }
  bool is_constant() const { return constant_; }

  SmallVec drift(std::size_t i, const SmallVec& x) const;
  double cost(std::size_t i, const SmallVec& x) const;

  /// Max value and the lowest index attaining it within the tie tolerance
  /// 1e-12 (1 + |H|).
  HamiltonianValue eval(const SmallVec& x, const SmallVec& p) const;
  /// b_{i*}(x) for the selected argmax index; an element of the subdifferential.
  SmallVec subgradient(const SmallVec& x, const SmallVec& p) const;

  static constexpr double kTieTolerance = 1e-12;

 private:
  int dim_;
  std::vector<Control> controls_;
  double lipschitz_ = 0.0;
  bool constant_ = true;
};

enum class QpMode { ActiveSetEnumeration, ProjectedGradient };

struct ProxResult {
  SmallVec q_star;
  Eigen::VectorXd weights;  // point of the probability simplex
  SmallVec gradient;        // sum_i weights_i b_i = (p - q*) / lambda
  double kkt_residual = 0.0;
  int iterations = 0;
};

class QpNonConvergence : public std::runtime_error {
 public:
  QpNonConvergence(const std::string& what, int iterations)
      : std::runtime_error(what), iterations_(iterations) {}
  int iterations() const { return iterations_; }

 private:
  int iterations_;
};

/// Moreau-Yosida envelope H_lambda(x, p) = inf_q { H(x, q) + |q - p|^2 / (2 lambda) }.
///
/// The prox point is computed from the dual problem: maximise
/// g(mu) = (B mu) . p - f . mu - lambda/2 |B mu|^2 over the probability simplex,
/// where B holds the drifts as columns; then q* = p - lambda B mu and the envelope
/// gradient is B mu. Active-set enumeration solves the KKT system on every support
/// of affinely independent drifts (at most d + 1 of them); an optimal support of
/// that kind always exists.
class MoreauEnvelope {
 public:
  MoreauEnvelope(std::shared_ptr<const PolyhedralHamiltonian> base, double lambda,
                 QpMode mode = QpMode::ActiveSetEnumeration, double qp_tol = 1e-10);

  const PolyhedralHamiltonian& base() const { return *base_; }
  double lambda() const { return lambda_; }
  QpMode mode() const { return mode_; }
  double qp_tol() const { return qp_tol_; }

  ProxResult prox(const SmallVec& x, const SmallVec& p) const;
  double value(const SmallVec& x, const SmallVec& p) const;
  SmallVec gradient(const SmallVec& x, const SmallVec& p) const;
  /// Value and gradient from a single prox evaluation.
  std::pair<double, SmallVec> value_and_gradient(const SmallVec& x, const SmallVec& p) const;

 private:
  ProxResult solve_enumeration(const Eigen::MatrixXd& drifts, const Eigen::VectorXd& affine,
                               const SmallVec& p) const;
  ProxResult solve_projected_gradient(const Eigen::MatrixXd& drifts,
                                      const Eigen::VectorXd& affine, const SmallVec& p) const;

  std::shared_ptr<const PolyhedralHamiltonian> base_;
  double lambda_;
  QpMode mode_;
  double qp_tol_;
};

/// Euclidean projection onto the probability simplex (sort-based).
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

}  // namespace mfgfem
