#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "mfgfem/mesh.hpp"

using namespace mfgfem;

namespace {

double edge(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

// Diameter over inradius of one triangle, from side lengths.
double triangle_ratio(const Point& a, const Point& b, const Point& c) {
  const double la = edge(b, c), lb = edge(a, c), lc = edge(a, b);
  const double s = 0.5 * (la + lb + lc);
  const double area = std::sqrt(s * (s - la) * (s - lb) * (s - lc));
  return std::max({la, lb, lc}) / (area / s);
}

}  // namespace

TEST_SUITE("mesh") {
  TEST_CASE("structured counts") {
    auto sq = build_structured(DomainTag::UnitSquare, 2);
    CHECK(sq->num_elements() == 8);
    CHECK(sq->num_vertices() == 9);
    CHECK(sq->num_interior_vertices() == 1);

    auto iv = build_structured(DomainTag::UnitInterval, 4);
    CHECK(iv->num_elements() == 4);
    CHECK(iv->num_vertices() == 5);
    CHECK(iv->num_interior_vertices() == 3);

    auto ls = build_structured(DomainTag::LShape, 2);
    CHECK(ls->num_elements() == 6);
    CHECK(ls->num_vertices() == 8);
    CHECK(ls->num_interior_vertices() == 0);

    CHECK_THROWS(build_structured(DomainTag::LShape, 3));
    CHECK_THROWS(build_structured(DomainTag::UnitSquare, 0));
  }

  TEST_CASE("conformity of every domain and level") {
    for (DomainTag tag : {DomainTag::UnitInterval, DomainTag::UnitSquare, DomainTag::LShape}) {
      for (int level = 0; level <= 4; ++level) {
        auto mesh = build_level(tag, level);
        CHECK_MESSAGE(check_conformity(*mesh).empty(), to_string(tag), " level ", level);
        for (std::size_t k = 0; k < mesh->num_elements(); ++k) CHECK(mesh->element_measure(k) > 0.0);
      }
    }
  }

  TEST_CASE("red refinement") {
    auto coarse = build_structured(DomainTag::UnitSquare, 2);
    auto fine = refine_uniform(coarse);
    CHECK(fine->num_elements() == 32);
    CHECK(fine->num_vertices() == 25);
    const MeshMetrics mc = metrics(*coarse), mf = metrics(*fine);
    CHECK(mf.h_max == doctest::Approx(mc.h_max / 2).epsilon(1e-14));
    CHECK(mf.shape_regularity == doctest::Approx(mc.shape_regularity).epsilon(1e-12));
    CHECK(fine->parent() == coarse);
    CHECK(fine->level() == coarse->level() + 1);
  }

  TEST_CASE("metrics") {
    CHECK(metrics(*build_structured(DomainTag::UnitSquare, 2)).h_max == doctest::Approx(std::sqrt(2.0) / 2));
    CHECK(metrics(*build_structured(DomainTag::UnitInterval, 4)).h_max == doctest::Approx(0.25));
    const Point a{0, 0}, b{0.3, 0}, c{0, 0.3};
    const double expected = 2 * std::sqrt(2.0) / (2 - std::sqrt(2.0));
    CHECK(triangle_ratio(a, b, c) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(metrics(*build_structured(DomainTag::UnitSquare, 4)).shape_regularity ==
          doctest::Approx(expected).epsilon(1e-12));
    CHECK(metrics(*build_structured(DomainTag::UnitSquare, 4)).max_angle_deg == doctest::Approx(90.0));
  }

  TEST_CASE("prolongation stencils") {
    auto coarse = build_structured(DomainTag::UnitSquare, 2);
    auto fine = refine_uniform(refine_uniform(coarse));
    const ProlongationStencil st = prolong_map(coarse, fine);
    REQUIRE(st.size() == fine->num_vertices());
    for (std::size_t v = 0; v < coarse->num_vertices(); ++v) {
      REQUIRE(st[v].size() == 1);
      CHECK(st[v][0].coarse_vertex == static_cast<int>(v));
      CHECK(st[v][0].weight == 1.0);
    }
    auto once = refine_uniform(coarse);
    const ProlongationStencil st1 = prolong_map(coarse, once);
    const auto& mids = once->refinement()->midpoint_parents;
    for (std::size_t i = 0; i < mids.size(); ++i) {
      const auto& s = st1[coarse->num_vertices() + i];
      REQUIRE(s.size() == 2);
      CHECK(s[0].weight == 0.5);
      CHECK(s[1].weight == 0.5);
      std::set<int> ends{s[0].coarse_vertex, s[1].coarse_vertex};
      CHECK(ends == std::set<int>{mids[i].first, mids[i].second});
    }
    const std::vector<double> ones(coarse->num_vertices(), 1.0);
    for (double v : prolongate(st, ones)) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));

    // Affine functions prolong exactly, and each fine element sits in one coarse element.
    std::vector<double> affine;
    for (const Point& p : coarse->vertices()) affine.push_back(1 + 2 * p[0] - 3 * p[1]);
    const auto fine_values = prolongate(st, affine);
    for (std::size_t v = 0; v < fine->num_vertices(); ++v) {
      const Point& p = fine->vertex(v);
      CHECK(fine_values[v] == doctest::Approx(1 + 2 * p[0] - 3 * p[1]).epsilon(1e-14));
    }
    for (const auto& el : fine->elements()) {
      std::set<int> used;
      for (int i = 0; i < 3; ++i)
        for (const auto& e : st[el[i]]) used.insert(e.coarse_vertex);
      bool inside_one = false;
      for (const auto& cel : coarse->elements()) {
        std::set<int> cv(cel.begin(), cel.end());
        bool all = true;
        for (int u : used) all = all && cv.count(u);
        inside_one = inside_one || all;
      }
      CHECK(inside_one);
    }
  }

  TEST_CASE("prolongation rejects unrelated meshes") {
    auto a = build_level(DomainTag::UnitSquare, 1);
    auto b = build_level(DomainTag::UnitSquare, 2);
    CHECK_THROWS_AS(prolong_map(a, b), std::invalid_argument);
  }

  TEST_CASE("vtk output") {
    auto mesh = build_structured(DomainTag::UnitSquare, 2);
    std::ostringstream os;
    write_vtk(os, *mesh, {{"f", std::vector<double>(9, 1.0)}});
    CHECK(os.str().find("CELLS 8 32") != std::string::npos);
    CHECK(os.str().find("POINT_DATA 9") != std::string::npos);
  }
}
