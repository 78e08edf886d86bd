// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/QR>
#include <spdlog/spdlog.h>

#include "mfgfem/experiments.hpp"

using namespace mfgfem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Brute-force oracle: pattern search over a dense grid around the current best
// point, in a randomly rotated frame each round. The radius shrinks only when a
// round brings no real improvement, so the search can follow the kinks of a
// polyhedral objective.

double grid_envelope(const PolyhedralHamiltonian& h, const SmallVec& x, const SmallVec& p, double lambda) {
  const int d = h.dim();
  auto obj = [&](const SmallVec& q) { return h.eval(x, q).value + (q - p).squaredNorm() / (2 * lambda); };
  const int n = d == 1 ? 201 : d == 2 ? 41 : 15;
  int total = 1;
  for (int i = 0; i < d; ++i) total *= n;
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  SmallVec center = p;
  double best = obj(center);
  double radius = lambda * h.lipschitz() + 1e-3;
  SmallVec q(d), offset(d);
  for (int round = 0; round < 4000 && radius > 1e-10; ++round) {
    Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(d, d);
    if (d > 1) {
      Eigen::MatrixXd a(d, d);
      for (int i = 0; i < d * d; ++i) a.data()[i] = g(rng);
      rot = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
    }
    SmallVec arg = center;
    const double before = best;
    for (int idx = 0; idx < total; ++idx) {
      int rest = idx;
      for (int k = 0; k < d; ++k) {
        offset[k] = -radius + 2 * radius * (rest % n) / (n - 1);
        rest /= n;
      }
      q = center + rot * offset;
      const double v = obj(q);
      if (v < best) best = v, arg = q;
    }
    if (best > before - 1e-15 * (1 + std::abs(before))) radius *= 0.7;
    center = arg;
  }
  return best;
}

std::shared_ptr<const PolyhedralHamiltonian> random_hamiltonian(std::mt19937_64& rng, int d, int n) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<SmallVec> drifts;
  std::vector<double> costs;
  for (int i = 0; i < n; ++i) {
    SmallVec b(d);
    for (int k = 0; k < d; ++k) b[k] = g(rng);
    b *= std::pow(u(rng), 1.0 / d) / b.norm();  // uniform in the unit ball
    drifts.push_back(b);
    costs.push_back(u(rng) - 0.5);
  }
  return std::make_shared<PolyhedralHamiltonian>(PolyhedralHamiltonian::constant(d, drifts, costs));
}

Outcome criterion_moreau() {
  std::mt19937_64 rng(20240501);
  const int ns[] = {1, 2, 4, 8};
  const double lambdas[] = {1.0, 0.25, 1.0 / 16, 1.0 / 256};
  std::uniform_int_distribution<int> pick(0, 3), dim(1, 3), small_n(1, 6);
  std::normal_distribution<double> g;
  double worst_sandwich = 0.0, worst_grad = 0.0, worst_lip = 0.0, worst_grid = 0.0;
  int failures = 0;
  for (int s = 0; s < 10000; ++s) {
    const int d = dim(rng);
    const int n = ns[pick(rng)];
    const double lambda = lambdas[pick(rng)];
    const auto h = random_hamiltonian(rng, d, n);
    const MoreauEnvelope env(h, lambda);
    SmallVec x = SmallVec::Zero(d), p(d), p2(d);
    for (int k = 0; k < d; ++k) p[k] = 2 * g(rng), p2[k] = p[k] + lambda * g(rng);
    const double L = h->lipschitz();
    const auto [value, grad] = env.value_and_gradient(x, p);
    const double gap = h->eval(x, p).value - value;
    const double bound = L * L * lambda / 2;
    worst_sandwich = std::max({worst_sandwich, -gap, gap - bound});
    if (gap < 0.0 || gap > bound + 1e-10) ++failures;
    worst_grad = std::max(worst_grad, grad.norm() - L);
    if (grad.norm() > L + 1e-12) ++failures;
    const double ratio = (env.gradient(x, p2) - grad).norm() / (p2 - p).norm();
    worst_lip = std::max(worst_lip, ratio - 1.0 / lambda);
    if (ratio > 1.0 / lambda + 1e-8) ++failures;
  }
  for (int s = 0; s < 1000; ++s) {
    const int d = dim(rng);
    const auto h = random_hamiltonian(rng, d, small_n(rng));
    const double lambda = lambdas[pick(rng)];
    const MoreauEnvelope env(h, lambda);
    SmallVec x = SmallVec::Zero(d), p(d);
    for (int k = 0; k < d; ++k) p[k] = 2 * g(rng);
    const double err = std::abs(env.value(x, p) - grid_envelope(*h, x, p, lambda));
    worst_grid = std::max(worst_grid, err);
    if (err > 1e-5) ++failures;
  }
  return {failures == 0, "violations " + std::to_string(failures) + ", worst sandwich excess " + fmt(worst_sandwich) +
                             ", gradient excess " + fmt(worst_grad) + ", Lipschitz excess " + fmt(worst_lip) +
                             ", grid error " + fmt(worst_grid)};
}

Outcome criterion_huber() {
  const auto h = std::make_shared<PolyhedralHamiltonian>(PolyhedralHamiltonian::absolute_value());
  const double lambda = 0.5;
  const MoreauEnvelope env(h, lambda);
  SmallVec x = SmallVec::Zero(1), p(1);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    p[0] = -3.0 + 6.0 * i / 999;
    const double huber = std::abs(p[0]) > lambda ? std::abs(p[0]) - lambda / 2 : p[0] * p[0] / (2 * lambda);
    const double clamp = std::clamp(p[0] / lambda, -1.0, 1.0);
    const auto [value, grad] = env.value_and_gradient(x, p);
    worst = std::max({worst, std::abs(value - huber), std::abs(grad[0] - clamp)});
  }
  p[0] = 1.0;
  const double v1 = env.value(x, p);
  p[0] = 0.2;
  const double g02 = env.gradient(x, p)[0];
  const bool ok = worst <= 1e-10 && std::abs(v1 - 0.75) <= 1e-10 && std::abs(g02 - 0.4) <= 1e-10;
  return {ok, "max deviation " + fmt(worst) + ", H_0.5(1) = " + fmt(v1) + ", grad H_0.5(0.2) = " + fmt(g02)};
}

// ---------------------------------------------------------------------------

DriftSamples random_drift(const P1Space& space, std::mt19937_64& rng, int kind) {
  std::uniform_real_distribution<double> u(-1, 1);
  const auto n = static_cast<Eigen::Index>(space.num_quad_points());
  DriftSamples b = DriftSamples::Zero(2, n);
  const int d = space.dim();
  auto clip = [&](Eigen::Vector2d v) {
    if (d == 1) v[1] = 0.0;
    const double r = v.norm();
    return r > 1.0 ? Eigen::Vector2d(v / r) : v;
  };
  if (kind == 0) {  // independent samples
    for (Eigen::Index q = 0; q < n; ++q) b.col(q) = clip({u(rng), u(rng)});
  } else if (kind == 1) {  // constant unit drift
    Eigen::Vector2d v(u(rng), d == 1 ? 0.0 : u(rng));
    v /= v.norm();
    for (Eigen::Index q = 0; q < n; ++q) b.col(q) = v;
  } else {  // smooth field of unit speed
    const double a = 6 * u(rng), c = 6 * u(rng), ph = 3 * u(rng);
    const auto pts = space.quad_points();
    for (Eigen::Index q = 0; q < n; ++q) {
      const double t = a * pts[q][0] + c * pts[q][1] + ph;
      b.col(q) = clip({std::cos(t), std::sin(t)});
    }
  }
  return b;
}

Outcome criterion_dmp() {
  std::mt19937_64 rng(99);
  int cases = 0, failures = 0, max_escalations = 0;
  double min_m = std::numeric_limits<double>::infinity();
  for (DomainTag tag : {DomainTag::UnitInterval, DomainTag::UnitSquare}) {
    for (int level = 2; level <= 5; ++level) {
      MfgProblem p;
      p.space = std::make_shared<P1Space>(build_level(tag, level));
      p.hamiltonian = std::make_shared<PolyhedralHamiltonian>(
          tag == DomainTag::UnitInterval ? PolyhedralHamiltonian::absolute_value() : PolyhedralHamiltonian::max_norm(2));
      for (int t = 0; t < 100; ++t) {
        ++cases;
        const DriftSamples b = random_drift(*p.space, rng, t % 3);
        double sigma = p.sigma;
        bool solved = false;
        for (int esc = 0; esc <= 3 && !solved; ++esc, sigma *= 2) {
          const Discretization d = discretize(p, sigma);
          try {
            const KfpResult r = solve_kfp(p, d, b);
            min_m = std::min(min_m, r.m.minCoeff());
            if (r.m.minCoeff() < -1e-12) ++failures;
            max_escalations = std::max(max_escalations, esc);
            solved = true;
          } catch (const DmpViolation&) {
          }
        }
        if (!solved) ++failures;
      }
    }
  }
  return {failures == 0, std::to_string(cases) + " drifts, failures " + std::to_string(failures) +
                             ", max escalations " + std::to_string(max_escalations) + ", min m " + fmt(min_m)};
}

// ---------------------------------------------------------------------------

Outcome criterion_poisson() {
  const ScalarField exact = [](const Point& x) { return std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]); };
  const VectorField grad = [](const Point& x) {
    return Point{M_PI * std::cos(M_PI * x[0]) * std::sin(M_PI * x[1]),
                 M_PI * std::sin(M_PI * x[0]) * std::cos(M_PI * x[1])};
  };
  std::vector<std::pair<double, double>> h1, l2;
  for (int level = 3; level <= 6; ++level) {
    // b = 0: the KFP equation reduces to -Laplace m = g0.
    MfgProblem p;
    p.space = std::make_shared<P1Space>(build_level(DomainTag::UnitSquare, level));
    p.hamiltonian = std::make_shared<PolyhedralHamiltonian>(PolyhedralHamiltonian::max_norm(2));
    p.sigma = 0.0;
    p.source.g0 = *builtin_scalar_field("poisson_sinxy", 2);
    const KfpResult r = solve_kfp(p, discretize(p, 0.0), constant_drift(*p.space, {0, 0}));
    const FieldError e = error_to_exact(*p.space, r.m, exact, grad);
    const double h = metrics(p.space->mesh()).h_max;
    h1.emplace_back(h, e.h1);
    l2.emplace_back(h, e.l2);
  }
  const double s1 = fit_rate(h1).slope, s2 = fit_rate(l2).slope;

  double nodal = 0.0;
  for (int level = 2; level <= 8; ++level) {
    MfgProblem p;
    p.space = std::make_shared<P1Space>(build_level(DomainTag::UnitInterval, level));
    p.hamiltonian = std::make_shared<PolyhedralHamiltonian>(PolyhedralHamiltonian::absolute_value());
    p.sigma = 0.0;
    const KfpResult r = solve_kfp(p, discretize(p, 0.0), constant_drift(*p.space, {0, 0}));
    for (std::size_t i = 0; i < p.space->n_dofs(); ++i) {
      const double x = p.space->mesh().vertex(static_cast<std::size_t>(p.space->interior_dofs()[i]))[0];
      nodal = std::max(nodal, std::abs(r.m[static_cast<Eigen::Index>(i)] - x * (1 - x) / 2));
    }
  }
  const bool ok = std::abs(s1 - 1.0) <= 0.15 && std::abs(s2 - 2.0) <= 0.3 && nodal <= 1e-12;
  return {ok, "H1 rate " + fmt(s1) + ", L2 rate " + fmt(s2) + ", 1D nodal error " + fmt(nodal)};
}

// ---------------------------------------------------------------------------

const char* kBench1d = R"(domain = unit_interval
hamiltonian.preset = abs
nu = 1
coupling.kappa = 1
source.g0 = 1
output.timing = false
)";

struct Certificate {
  int solves = 0;
  int above = 0;
  double worst = 0.0;
  double bound = 0.0;

  void add(double total) {
    ++solves;
    worst = std::max(worst, total);
    if (!(total <= bound)) ++above;
  }
};

double certificate_bound(const SolverConfig& s) { return 10.0 * (s.outer_tol + s.inner_tol); }

StudyResult lambda_study;
ExperimentConfig lambda_config;
StudyResult h_study;
ExperimentConfig h_config;

Outcome criterion_lambda_rate(const RunOptions& options) {
  lambda_config = parse_experiment_config(std::string(kBench1d) +
                                          "level = 6\nlambda.list = 1/4, 1/8, 1/16, 1/32, 1/64, 1/128, 1/256\n");
  lambda_study = study_lambda(lambda_config, options);
  double slope = std::nan("");
  for (const auto& [name, fit] : lambda_study.fits)
    if (name == "err_m_l2_vs_lambda") slope = fit.slope;
  int failed = 0;
  for (const LevelRow& r : lambda_study.rows) failed += r.ok() ? 0 : 1;

  const ExperimentConfig one = parse_experiment_config(
      "domain = unit_interval\nlevel = 6\nhamiltonian.control.1.b = 1\nhamiltonian.control.1.f = 0\n"
      "lambda.list = 1/4, 1/16, 1/64, 1/256\noutput.timing = false\n");
  const StudyResult single = study_lambda(one, options);
  double worst_single = 0.0;
  bool single_ok = true;
  for (const LevelRow& r : single.rows) {
    single_ok = single_ok && r.ok();
    worst_single = std::max(worst_single, r.err_m_l2);
  }
  const bool ok = failed == 0 && slope >= 0.45 && single_ok && worst_single == 0.0;
  return {ok, "slope " + fmt(slope) + " over " + std::to_string(lambda_study.rows.size()) + " lambdas (failed " +
                  std::to_string(failed) + "), reference " +
                  (lambda_study.reference.lambda ? "lambda " + fmt(*lambda_study.reference.lambda) : "unregularized") +
                  ", single-control max error " + fmt(worst_single)};
}

Outcome criterion_h_rate(const RunOptions& options) {
  h_config = parse_experiment_config(
      "domain = unit_square\nlevel.min = 3\nlevel.max = 6\nreference.finer_levels = 2\ngamma = 1\n"
      "hamiltonian.preset = max_norm\nnu = 1\ncoupling.kappa = 1\nsource.g0 = 1\n"
      "lambda.schedule = coupled\nlambda.c = 1\noutput.timing = false\n");
  h_study = study_h(h_config, options);
  double slope = std::nan(""), su = std::nan(""), sm = std::nan("");
  for (const auto& [name, fit] : h_study.fits) {
    if (name == "err_sum") slope = fit.slope;
    if (name == "err_u_h1") su = fit.slope;
    if (name == "err_m_l2") sm = fit.slope;
  }
  int failed = 0;
  for (const LevelRow& r : h_study.rows) failed += r.ok() ? 0 : 1;
  const bool ok = failed == 0 && slope >= 0.30;
  return {ok, "summed-error slope " + fmt(slope) + " (u " + fmt(su) + ", m " + fmt(sm) +
                  "; optimal order would be near 1), reference level " + std::to_string(h_study.reference.level) +
                  " with " +
                  (h_study.reference.lambda ? "lambda " + fmt(*h_study.reference.lambda) : std::string("no lambda")) +
                  ", failed rows " + std::to_string(failed)};
}

Outcome criterion_certificate() {
  Certificate c;
  c.bound = certificate_bound(lambda_config.solver);
  for (const LevelRow& r : lambda_study.rows)
    if (r.ok()) c.add(r.r1_dual + r.r2_dual);
  c.add(lambda_study.reference.residuals.total_dual());
  for (const LevelRow& r : h_study.rows)
    if (r.ok()) c.add(r.r1_dual + r.r2_dual);
  c.add(h_study.reference.residuals.total_dual());
  return {c.above == 0 && c.solves > 0, std::to_string(c.solves) + " solves, worst ||R1|| + ||R2|| = " +
                                            fmt(c.worst) + " (bound " + fmt(c.bound) + ")"};
}

Outcome criterion_zero_data() {
  double worst = 0.0;
  int max_outer = 0;
  for (const char* text : {"domain = unit_square\nlevel = 4\nsource.g0 = 0\n",
                           "domain = unit_square\nlevel = 4\nsource.g0 = 0\nlambda = 0.25\n",
                           "domain = unit_interval\nlevel = 5\nhamiltonian.preset = abs\nsource.g0 = 0\n",
                           "domain = lshape\nlevel = 3\nsource.g0 = 0\nlambda = 1/16\n"}) {
    const SolveReport r = run_solve(parse_experiment_config(text));
    worst = std::max({worst, r.solution.u.values.cwiseAbs().maxCoeff(), r.solution.m.values.cwiseAbs().maxCoeff(),
                      r.residuals.r1_dual, r.residuals.r2_dual, r.residuals.r1_inf, r.residuals.r2_inf});
    max_outer = std::max(max_outer, r.solution.telemetry.outer_iterations);
  }
  return {worst <= 1e-12 && max_outer == 1,
          "max |field| or residual " + fmt(worst) + ", outer iterations " + std::to_string(max_outer)};
}

// Decreasing sequence with at most one increase, and that one within 10%.
bool nearly_decreasing(const std::vector<double>& e, int& violations) {
  violations = 0;
  bool ok = true;
  for (std::size_t i = 1; i < e.size(); ++i) {
    if (e[i] < e[i - 1]) continue;
    ++violations;
    if (e[i] > 1.1 * e[i - 1]) ok = false;
  }
  return ok && violations <= 1;
}

Outcome criterion_joint() {
  std::vector<double> eu, em;
  for (const LevelRow& r : h_study.rows) {
    if (!r.ok()) return {false, "level " + std::to_string(r.level) + " failed: " + r.error};
    eu.push_back(r.err_u_h1);
    em.push_back(r.err_m_l2);
  }
  int vu = 0, vm = 0;
  const bool ok = nearly_decreasing(eu, vu) && nearly_decreasing(em, vm);
  std::string seq = "u:";
  for (double v : eu) seq += " " + fmt(v);
  seq += ", m:";
  for (double v : em) seq += " " + fmt(v);
  return {ok, seq + " (increases u " + std::to_string(vu) + ", m " + std::to_string(vm) + ")"};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  RunOptions options;
  options.threads = 1;

  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Entry> entries = {
      {1, "moreau-yosida suite", criterion_moreau},
      {2, "huber closed form", criterion_huber},
      {3, "dmp suite", criterion_dmp},
      {4, "poisson sanity", criterion_poisson},
      {5, "lambda rate", [&] { return criterion_lambda_rate(options); }},
      {6, "mesh rate with coupled lambda", [&] { return criterion_h_rate(options); }},
      {7, "residual certificate", criterion_certificate},
      {8, "zero-data exactness", criterion_zero_data},
      {9, "joint-limit convergence", criterion_joint},
  };
  int failed = 0;
  for (const Entry& e : entries) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = e.run();
    } catch (const std::exception& ex) {
      o = {false, std::string("error: ") + ex.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %d %s: %s (%s) [%.1f s]\n", e.id, e.name, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
