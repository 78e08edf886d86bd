#include <doctest.h>

#include <cmath>
#include <random>

#include "mfgfem/coupling.hpp"
#include "mfgfem/source.hpp"

using namespace mfgfem;

namespace {
SpacePtr space_of(DomainTag tag, int n) { return std::make_shared<P1Space>(build_structured(tag, n)); }
}  // namespace

TEST_SUITE("coupling") {
  TEST_CASE("pointwise values") {
    const Point x{0.3, 0.4};
    CouplingF lin;
    CHECK(lin(x, 0.0) == 0.0);
    lin.kappa = 2;
    lin.F0 = constant_field(0.5);
    CHECK(lin(x, 1.0) == doctest::Approx(2.5));
    CouplingF sat;
    sat.kind = CouplingKind::LocalSaturating;
    sat.rho_scale = 1;
    sat.F0 = constant_field(0.25);
    CHECK(sat(x, 0.0) == doctest::Approx(0.25));
    CHECK(sat(x, 2.0) == doctest::Approx(2.0 + std::tanh(2.0) + 0.25));
    CHECK(sat.lipschitz() == 2.0);
    CHECK(sat.monotonicity() == 1.0);
  }

  TEST_CASE("validation and names") {
    CouplingF c;
    c.kappa = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.kappa = 1;
    c.rho_scale = -1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    CHECK(parse_coupling_kind("local_saturating") == CouplingKind::LocalSaturating);
    CHECK_FALSE(parse_coupling_kind("quadratic").has_value());
  }

  TEST_CASE("load vectors") {
    auto s = space_of(DomainTag::UnitInterval, 4);
    CouplingF c;
    CHECK(assemble_F_load(*s, c, Vec::Zero(3)).cwiseAbs().maxCoeff() == 0.0);
    c.F0 = constant_field(1.0);
    for (double v : assemble_F_load(*s, c, Vec::Zero(3))) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));

    auto s2 = space_of(DomainTag::UnitSquare, 6);
    CouplingF lin;
    const Vec m = Vec::LinSpaced(static_cast<Eigen::Index>(s2->n_dofs()), -1.0, 2.0);
    const Vec expected = assemble_mass(*s2).apply(m);
    CHECK((assemble_F_load(*s2, lin, m) - expected).cwiseAbs().maxCoeff() < 1e-14);
  }

  TEST_CASE("strong monotonicity on random fields") {
    auto s = space_of(DomainTag::UnitSquare, 6);
    const auto n = static_cast<Eigen::Index>(s->n_dofs());
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (auto kind : {CouplingKind::LocalLinear, CouplingKind::LocalSaturating}) {
      CouplingF c;
      c.kind = kind;
      c.kappa = 1.5;
      c.rho_scale = 2.0;
      for (int t = 0; t < 20; ++t) {
        Vec m1(n), m2(n);
        for (auto i = 0; i < n; ++i) m1[i] = g(rng), m2[i] = g(rng);
        const Vec diff = m1 - m2;
        const double lhs = diff.dot(assemble_F_load(*s, c, m1) - assemble_F_load(*s, c, m2));
        const double l2 = l2_norm(*s, diff);
        CHECK(lhs >= c.monotonicity() * l2 * l2 - 1e-10);
        if (kind == CouplingKind::LocalLinear) CHECK(lhs == doctest::Approx(c.kappa * l2 * l2).epsilon(1e-12));
      }
    }
  }
}

TEST_SUITE("source") {
  TEST_CASE("load vector") {
    auto s = space_of(DomainTag::UnitInterval, 4);
    SourceG g;
    for (double v : load_vector(*s, g)) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
    SourceG zero{constant_field(0.0), constant_vector_field(0.0), false};
    CHECK(load_vector(*s, zero).cwiseAbs().maxCoeff() == 0.0);
    auto s2 = space_of(DomainTag::UnitSquare, 5);
    SourceG bump{*builtin_scalar_field("bump", 2), constant_vector_field(0.0), false};
    SourceG bump3{[&](const Point& x) { return 3 * bump.g0(x); }, constant_vector_field(0.0), false};
    const Vec a = load_vector(*s2, bump), b = load_vector(*s2, bump3);
    CHECK((b - 3 * a).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(a.minCoeff() >= 0.0);
  }

  TEST_CASE("negative g0 is rejected") {
    auto s = space_of(DomainTag::UnitSquare, 4);
    SourceG bad{constant_field(-0.1), constant_vector_field(0.0), false};
    CHECK_THROWS_AS(check_source(*s, bad), std::invalid_argument);
    SourceG with_g1{constant_field(1.0), constant_vector_field(1.0, 0.0), true};
    CHECK_NOTHROW(check_source(*s, with_g1));
  }
}
