#include "mfgfem/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

namespace mfgfem {

Control Control::make_constant(const SmallVec& b, double f) {
  Control c;
  c.constant = true;
  c.drift_value = b;
  c.cost_value = f;
  c.drift = [b](const SmallVec&) { return b; };
  c.cost = [f](const SmallVec&) { return f; };
  return c;
}

PolyhedralHamiltonian::PolyhedralHamiltonian(int dim, std::vector<Control> controls)
    : dim_(dim), controls_(std::move(controls)) {
  if (dim_ < 1 || dim_ > 3) throw std::invalid_argument("PolyhedralHamiltonian: dimension must be 1..3");
  if (controls_.empty()) throw std::invalid_argument("PolyhedralHamiltonian: needs at least one control");
  constant_ = std::all_of(controls_.begin(), controls_.end(), [](const Control& c) { return c.constant; });

  bool sampled = false;
  for (const Control& c : controls_) {
    if (c.constant) {
      if (c.drift_value.size() != dim_) {
        throw std::invalid_argument("PolyhedralHamiltonian: drift has wrong dimension");
      }
      if (!std::isfinite(c.cost_value) || !c.drift_value.allFinite()) {
        throw std::invalid_argument("PolyhedralHamiltonian: control data must be finite");
      }
      lipschitz_ = std::max(lipschitz_, c.drift_value.norm());
      continue;
    }
    if (!c.drift || !c.cost) throw std::invalid_argument("PolyhedralHamiltonian: missing control field");
    sampled = true;
    constexpr int kGrid = 64;
    const int ny = dim_ >= 2 ? kGrid + 1 : 1;
    const int nz = dim_ >= 3 ? kGrid + 1 : 1;
    double worst = 0.0;
    SmallVec x(dim_);
    for (int i = 0; i <= kGrid; ++i) {
      for (int j = 0; j < ny; ++j) {
        for (int k = 0; k < nz; ++k) {
          x[0] = static_cast<double>(i) / kGrid;
          if (dim_ >= 2) x[1] = static_cast<double>(j) / kGrid;
          if (dim_ >= 3) x[2] = static_cast<double>(k) / kGrid;
          const SmallVec b = c.drift(x);
          const double f = c.cost(x);
          if (!b.allFinite() || !std::isfinite(f)) {
            throw std::invalid_argument("PolyhedralHamiltonian: control field not finite on the sample grid");
          }
          worst = std::max(worst, b.norm());
        }
      }
    }
    lipschitz_ = std::max(lipschitz_, 1.01 * worst);
  }
  if (sampled) spdlog::info("PolyhedralHamiltonian: sampled L_H = {:.6g} (64-point grid, x1.01)", lipschitz_);
  if (!(lipschitz_ > 0.0)) throw std::invalid_argument("PolyhedralHamiltonian: L_H must be positive");
}

PolyhedralHamiltonian PolyhedralHamiltonian::constant(int dim, const std::vector<SmallVec>& drifts,
                                                      const std::vector<double>& costs) {
  if (drifts.size() != costs.size()) {
    throw std::invalid_argument("PolyhedralHamiltonian::constant: drift and cost counts differ");
  }
  std::vector<Control> controls;
  for (std::size_t i = 0; i < drifts.size(); ++i) controls.push_back(Control::make_constant(drifts[i], costs[i]));
  return PolyhedralHamiltonian(dim, std::move(controls));
}

PolyhedralHamiltonian PolyhedralHamiltonian::absolute_value() {
  SmallVec plus(1), minus(1);
  plus << 1.0;
  minus << -1.0;
  return constant(1, {plus, minus}, {0.0, 0.0});
}

PolyhedralHamiltonian PolyhedralHamiltonian::max_norm(int dim) {
  std::vector<SmallVec> drifts;
  for (int k = 0; k < dim; ++k) {
    SmallVec e = SmallVec::Zero(dim);
    e[k] = 1.0;
    drifts.push_back(e);
    drifts.push_back(-e);
  }
  return constant(dim, drifts, std::vector<double>(drifts.size(), 0.0));
}

SmallVec PolyhedralHamiltonian::drift(std::size_t i, const SmallVec& x) const {
  const Control& c = controls_[i];
  return c.constant ? c.drift_value : c.drift(x);
}

double PolyhedralHamiltonian::cost(std::size_t i, const SmallVec& x) const {
  const Control& c = controls_[i];
  return c.constant ? c.cost_value : c.cost(x);
}

HamiltonianValue PolyhedralHamiltonian::eval(const SmallVec& x, const SmallVec& p) const {
  const std::size_t n = controls_.size();
  double values[64];
  std::vector<double> heap;
  double* v = values;
  if (n > 64) {
    heap.resize(n);
    v = heap.data();
  }
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = drift(i, x).dot(p) - cost(i, x);
    best = std::max(best, v[i]);
  }
  const double tol = kTieTolerance * (1.0 + std::abs(best));
  for (std::size_t i = 0; i < n; ++i) {
    if (v[i] >= best - tol) return {best, static_cast<int>(i)};
  }
  return {best, 0};
}

SmallVec PolyhedralHamiltonian::subgradient(const SmallVec& x, const SmallVec& p) const {
  return drift(static_cast<std::size_t>(eval(x, p).argmax_index), x);
}

// ---------------------------------------------------------------------------

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumulative += sorted[k];
    const double t = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] - t > 0.0) theta = t;
  }
  return (v.array() - theta).max(0.0).matrix();
}

MoreauEnvelope::MoreauEnvelope(std::shared_ptr<const PolyhedralHamiltonian> base, double lambda,
                               QpMode mode, double qp_tol)
    : base_(std::move(base)), lambda_(lambda), mode_(mode), qp_tol_(qp_tol) {
  if (!base_) throw std::invalid_argument("MoreauEnvelope: null Hamiltonian");
  if (!(lambda_ > 0.0 && lambda_ <= 1.0)) {
    throw std::invalid_argument("MoreauEnvelope: lambda must lie in (0, 1]");
  }
  if (!(qp_tol_ > 0.0)) throw std::invalid_argument("MoreauEnvelope: qp_tol must be positive");
  if (mode_ == QpMode::ActiveSetEnumeration && base_->size() > 16) {
    throw std::invalid_argument("MoreauEnvelope: active-set enumeration supports at most 16 controls");
  }
}

ProxResult MoreauEnvelope::solve_enumeration(const Eigen::MatrixXd& drifts,
                                             const Eigen::VectorXd& affine,
                                             const SmallVec& p) const {
  const int n = static_cast<int>(drifts.cols());
  const int d = static_cast<int>(drifts.rows());
  const int max_support = std::min(n, d + 1);
  using KktMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 5, 5>;
  using KktVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 5, 1>;
  using Weights = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 16, 1>;
  using Gram = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 16, 16>;

  const Gram gram = drifts.transpose() * drifts;
  const double scale = 1.0 + affine.cwiseAbs().maxCoeff() + lambda_ * gram.cwiseAbs().maxCoeff();
  const double tol = qp_tol_ * scale;

  // The dual objective is concave, so every KKT point is a maximiser. Supports are
  // visited by increasing size and the first one passing the KKT test is returned.
  Weights fallback;
  double fallback_residual = std::numeric_limits<double>::infinity();
  int examined = 0;
  int support[5];
  Weights mu(n);
  for (int s = 1; s <= max_support; ++s) {
    for (int a = 0; a < s; ++a) support[a] = a;
    while (true) {
      KktMatrix kkt(s + 1, s + 1);
      KktVector rhs(s + 1);
      for (int a = 0; a < s; ++a) {
        for (int b = 0; b < s; ++b) kkt(a, b) = lambda_ * gram(support[a], support[b]);
        kkt(a, s) = 1.0;
        kkt(s, a) = 1.0;
        rhs[a] = affine[support[a]];
      }
      kkt(s, s) = 0.0;
      rhs[s] = 1.0;
      ++examined;

      bool solvable = true;
      KktVector sol(s + 1);
      if (s == 1) {
        sol[0] = 1.0;
        sol[1] = affine[support[0]] - lambda_ * gram(support[0], support[0]);
      } else {
        Eigen::FullPivLU<KktMatrix> lu(kkt);
        lu.setThreshold(1e-13);
        solvable = lu.isInvertible();  // false for affinely dependent drifts
        if (solvable) sol = lu.solve(rhs);
      }

      if (solvable) {
        mu.setZero();
        for (int a = 0; a < s; ++a) mu[support[a]] = sol[a];
        const double tau = sol[s];
        const Weights gain = affine - lambda_ * (gram * mu);
        double residual = std::max(0.0, -mu.minCoeff());
        for (int j = 0; j < n; ++j) {
          if (mu[j] == 0.0) residual = std::max(residual, gain[j] - tau);
        }
        if (residual <= tol) {
          ProxResult out;
          out.weights = mu;
          out.kkt_residual = residual;
          out.iterations = examined;
          return out;
        }
        if (residual < fallback_residual) {
          fallback = mu;
          fallback_residual = residual;
        }
      }

      // Next combination of s indices out of n in lexicographic order.
      int a = s - 1;
      while (a >= 0 && support[a] == n - s + a) --a;
      if (a < 0) break;
      ++support[a];
      for (int b = a + 1; b < s; ++b) support[b] = support[b - 1] + 1;
    }
  }

  if (fallback_residual > 1e-6 * scale) return solve_projected_gradient(drifts, affine, p);
  spdlog::debug("prox: no KKT point within tolerance, best residual {:.3g}", fallback_residual);
  ProxResult out;
  out.weights = fallback;
  out.kkt_residual = fallback_residual;
  out.iterations = examined;
  return out;
}

ProxResult MoreauEnvelope::solve_projected_gradient(const Eigen::MatrixXd& drifts,
                                                    const Eigen::VectorXd& affine,
                                                    const SmallVec&) const {
  const Eigen::Index n = drifts.cols();
  const Eigen::MatrixXd gram = drifts.transpose() * drifts;
  const double lipschitz = lambda_ * drifts.squaredNorm();
  ProxResult out;
  if (!(lipschitz > 0.0)) {
    // All drifts vanish: the objective is linear, a vertex maximises it.
    Eigen::Index best;
    affine.maxCoeff(&best);
    out.weights = Eigen::VectorXd::Zero(n);
    out.weights[best] = 1.0;
    return out;
  }
  const double step = 1.0 / lipschitz;
  Eigen::VectorXd mu = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::VectorXd y = mu;
  double t = 1.0;
  constexpr int kMaxIterations = 200000;
  for (int it = 1; it <= kMaxIterations; ++it) {
    const Eigen::VectorXd next = project_to_simplex(y + step * (affine - lambda_ * (gram * y)));
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - mu);
    mu = next;
    t = t_next;
    const Eigen::VectorXd mapped = project_to_simplex(mu + step * (affine - lambda_ * (gram * mu)));
    const double residual = (mapped - mu).cwiseAbs().maxCoeff();
    if (residual <= qp_tol_) {
      out.weights = mu;
      out.kkt_residual = residual;
      out.iterations = it;
      return out;
    }
  }
  throw QpNonConvergence("prox: projected gradient did not reach qp_tol", kMaxIterations);
}

ProxResult MoreauEnvelope::prox(const SmallVec& x, const SmallVec& p) const {
  const PolyhedralHamiltonian& h = *base_;
  const int d = h.dim();
  if (p.size() != d) throw std::invalid_argument("MoreauEnvelope::prox: p has wrong dimension");
  const auto n = static_cast<Eigen::Index>(h.size());
  Eigen::MatrixXd drifts(d, n);
  Eigen::VectorXd affine(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    drifts.col(i) = h.drift(static_cast<std::size_t>(i), x);
    affine[i] = drifts.col(i).dot(p) - h.cost(static_cast<std::size_t>(i), x);
  }
  ProxResult r = mode_ == QpMode::ActiveSetEnumeration ? solve_enumeration(drifts, affine, p)
                                                        : solve_projected_gradient(drifts, affine, p);
  // Clean rounding so that the weights are an exact convex combination.
  r.weights = r.weights.cwiseMax(0.0);
  r.weights /= r.weights.sum();
  r.gradient = drifts * r.weights;
  r.q_star = p - lambda_ * r.gradient;
  return r;
}

double MoreauEnvelope::value(const SmallVec& x, const SmallVec& p) const {
  return value_and_gradient(x, p).first;
}

SmallVec MoreauEnvelope::gradient(const SmallVec& x, const SmallVec& p) const {
  return prox(x, p).gradient;
}

std::pair<double, SmallVec> MoreauEnvelope::value_and_gradient(const SmallVec& x,
                                                               const SmallVec& p) const {
  const ProxResult r = prox(x, p);
  const double value = base_->eval(x, r.q_star).value + (r.q_star - p).squaredNorm() / (2.0 * lambda_);
  return {value, r.gradient};
}

}  // namespace mfgfem
