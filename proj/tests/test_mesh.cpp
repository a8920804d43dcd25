#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ocpafem/mesh.hpp"

using namespace ocpafem;

namespace {

Mesh reference_triangle() {
  return Mesh(2, {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{{0, 1, 2, -1}}});
}

Mesh split_square() {
  return Mesh(2, {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}},
              {{{0, 1, 3, -1}}, {{0, 3, 2, -1}}});
}

}  // namespace

TEST_CASE("L-shape initial mesh") {
  const Mesh m = Mesh::lshape(0);
  CHECK(m.num_elements() == 6);
  CHECK(m.num_vertices() == 8);
  CHECK(m.total_volume() == doctest::Approx(3.0).epsilon(1e-14));
  CHECK_NOTHROW(m.conformity_check());
  CHECK(m.min_angle() == doctest::Approx(45.0).epsilon(1e-12));
  // (3 * 6 - #boundary edges) / 2 interior edges on the concrete mesh
  CHECK(static_cast<int>(m.boundary_faces().size()) == 8);
  CHECK(static_cast<int>(m.interior_faces().size()) == (3 * 6 - 8) / 2);
}

TEST_CASE("L-shape uniform refinement quadruples elements and keeps area") {
  const Mesh m1 = Mesh::lshape(1);
  CHECK(m1.num_elements() == 24);
  CHECK(m1.total_volume() == doctest::Approx(3.0).epsilon(1e-14));
  CHECK_NOTHROW(m1.conformity_check());
  const Mesh m2 = Mesh::lshape(2);
  CHECK(m2.num_elements() == 96);
}

TEST_CASE("Kuhn cube") {
  const Mesh c = Mesh::cube(0);
  CHECK(c.num_elements() == 6);
  CHECK(c.total_volume() == doctest::Approx(1.0).epsilon(1e-14));
  for (const auto& f : c.interior_faces()) {
    CHECK(f.plus >= 0);
    CHECK(f.minus >= 0);
  }
  CHECK_NOTHROW(c.conformity_check());

  const RefineResult rr = uniform_refine(c);
  CHECK(rr.mesh.num_elements() == 48);
  CHECK(rr.mesh.total_volume() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_NOTHROW(rr.mesh.conformity_check());
  // Diameter halves: Kuhn tets have diameter sqrt(3).
  double dmax = 0.0;
  for (int e = 0; e < rr.mesh.num_elements(); ++e)
    dmax = std::max(dmax, rr.mesh.element_diameter(e));
  CHECK(dmax == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-13));
}

TEST_CASE("single bisection splits the longest edge at its midpoint") {
  const Mesh t = reference_triangle();
  const RefineResult rr = refine(t, {0});
  CHECK(rr.mesh.num_elements() == 2);
  CHECK(rr.mesh.num_vertices() == 4);
  const Point& mid = rr.mesh.vertex(3);
  CHECK(mid[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(mid[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(rr.vertex_parents.size() == 1);
  // Children partition the parent.
  CHECK(rr.mesh.element_volume(0) + rr.mesh.element_volume(1) ==
        doctest::Approx(0.5).epsilon(1e-14));
  CHECK(rr.origin == std::vector<int>{0, 0});
}

TEST_CASE("empty marked set is a no-op") {
  const Mesh m = Mesh::lshape(1);
  const RefineResult rr = refine(m, {});
  CHECK(rr.mesh.num_elements() == m.num_elements());
  CHECK(rr.vertex_parents.empty());
}

TEST_CASE("marked elements are bisected at least once") {
  const Mesh m = Mesh::lshape(1);
  const std::vector<int> marked = {0, 5, 17};
  const RefineResult rr = refine(m, marked);
  for (int mk : marked) {
    int children = 0;
    for (int e = 0; e < rr.mesh.num_elements(); ++e)
      if (rr.origin[e] == mk) ++children;
    CHECK(children >= 2);
  }
}

TEST_CASE("child volumes sum to parent volume") {
  const Mesh m = Mesh::lshape(1);
  std::mt19937 rng(3);
  std::vector<int> marked;
  for (int e = 0; e < m.num_elements(); ++e)
    if (rng() % 2 == 0) marked.push_back(e);
  const RefineResult rr = refine(m, marked);
  std::vector<double> acc(m.num_elements(), 0.0);
  for (int e = 0; e < rr.mesh.num_elements(); ++e)
    acc[rr.origin[e]] += rr.mesh.element_volume(e);
  for (int e = 0; e < m.num_elements(); ++e)
    CHECK(acc[e] == doctest::Approx(m.element_volume(e)).epsilon(1e-12));
}

TEST_CASE("refinement is monotone in the vertex set") {
  const Mesh m = Mesh::lshape(1);
  const RefineResult rr = refine(m, {0, 1, 2});
  REQUIRE(rr.mesh.num_vertices() >= m.num_vertices());
  for (int v = 0; v < m.num_vertices(); ++v) {
    CHECK(rr.mesh.vertex(v)[0] == m.vertex(v)[0]);
    CHECK(rr.mesh.vertex(v)[1] == m.vertex(v)[1]);
  }
}

TEST_CASE("repeated full bisection keeps the min angle bounded") {
  Mesh m = Mesh::lshape(0);
  const double a0 = m.min_angle();
  std::vector<int> all;
  for (int round = 0; round < 10; ++round) {
    all.resize(m.num_elements());
    for (int e = 0; e < m.num_elements(); ++e) all[e] = e;
    m = refine(m, all).mesh;
    CHECK_NOTHROW(m.conformity_check());
  }
  CHECK(m.min_angle() >= 0.5 * a0 - 1e-12);
}

TEST_CASE("adaptive refinement min angle settles (finitely many shapes)") {
  Mesh m = Mesh::lshape(0);
  std::mt19937 rng(11);
  double angle_round3 = 0.0;
  for (int round = 0; round < 15; ++round) {
    std::vector<int> marked;
    for (int e = 0; e < m.num_elements(); ++e)
      if (rng() % 4 == 0) marked.push_back(e);
    if (marked.empty()) marked.push_back(static_cast<int>(rng() % m.num_elements()));
    m = refine(m, marked).mesh;
    if (round == 2) angle_round3 = m.min_angle();
    if (round >= 2) CHECK(m.min_angle() >= angle_round3 - 1e-12);
  }
}

TEST_CASE("uniform refinement halves diameters in 2D") {
  const Mesh m = Mesh::lshape(0);
  const RefineResult rr = uniform_refine(m);
  CHECK(rr.mesh.num_elements() == 24);
  double dmax = 0.0;
  for (int e = 0; e < rr.mesh.num_elements(); ++e)
    dmax = std::max(dmax, rr.mesh.element_diameter(e));
  CHECK(dmax == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-13));
  CHECK_NOTHROW(rr.mesh.conformity_check());
}

TEST_CASE("interior face of the split square") {
  const Mesh m = split_square();
  REQUIRE(m.interior_faces().size() == 1);
  const FaceRecord& f = m.interior_faces().front();
  const double len = std::hypot(f.normal[0], f.normal[1]);
  CHECK(len == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(f.measure == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(f.plus == 0);
  CHECK(f.minus == 1);
}

TEST_CASE("conformity check detects hanging nodes") {
  // Unit square: one whole triangle against two half triangles meeting at
  // the diagonal midpoint.
  const std::vector<Point> verts = {
      {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0.5, 0.5, 0}};
  const std::vector<std::array<int, 4>> elems = {
      {0, 1, 3, -1}, {1, 2, 4, -1}, {4, 2, 3, -1}};
  const Mesh bad(2, verts, elems);
  CHECK_THROWS(bad.conformity_check());
}

TEST_CASE("degenerate element is rejected") {
  CHECK_THROWS(Mesh(2, {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}, {{{0, 1, 2, -1}}}));
}

TEST_CASE("ascii round trip") {
  for (const Mesh& m : {Mesh::lshape(1), Mesh::cube(1)}) {
    std::stringstream ss;
    m.write_ascii(ss);
    const Mesh back = Mesh::read_ascii(ss);
    REQUIRE(back.num_vertices() == m.num_vertices());
    REQUIRE(back.num_elements() == m.num_elements());
    for (int v = 0; v < m.num_vertices(); ++v)
      for (int k = 0; k < 3; ++k) CHECK(back.vertex(v)[k] == m.vertex(v)[k]);
    for (int e = 0; e < m.num_elements(); ++e) CHECK(back.element(e) == m.element(e));
  }
}

TEST_CASE("vtk export smoke") {
  const Mesh m = Mesh::cube(0);
  std::stringstream ss;
  std::vector<double> vol(m.num_elements());
  for (int e = 0; e < m.num_elements(); ++e) vol[e] = m.element_volume(e);
  m.write_vtk(ss, {{"volume", &vol}});
  const std::string s = ss.str();
  CHECK(s.find("UNSTRUCTURED_GRID") != std::string::npos);
  CHECK(s.find("CELL_DATA 6") != std::string::npos);
}

TEST_CASE("marked index out of range is rejected") {
  const Mesh m = Mesh::lshape(0);
  CHECK_THROWS(refine(m, {99}));
}

TEST_CASE("dihedral angles") {
  // Regular tetrahedron: every dihedral angle is arccos(1/3).
  const double s3 = std::sqrt(3.0), s6 = std::sqrt(6.0);
  const Mesh reg(3,
                 {{0, 0, 0}, {1, 0, 0}, {0.5, s3 / 2, 0}, {0.5, s3 / 6, s6 / 3}},
                 {{{0, 1, 2, 3}}});
  const double expect = std::acos(1.0 / 3.0) * 180.0 / M_PI;
  CHECK(reg.min_angle() == doctest::Approx(expect).epsilon(1e-10));

  // Kuhn tetrahedra have dihedral angles 45, 60, and 90 degrees.
  CHECK(Mesh::cube(0).min_angle() == doctest::Approx(45.0).epsilon(1e-12));
}

TEST_CASE("3D interior face normals are unit and oriented plus-to-minus") {
  const Mesh c = Mesh::cube(0);
  for (const auto& f : c.interior_faces()) {
    const double len = std::sqrt(f.normal[0] * f.normal[0] + f.normal[1] * f.normal[1] +
                                 f.normal[2] * f.normal[2]);
    CHECK(len == doctest::Approx(1.0).epsilon(1e-14));
    // Normal points from the plus element's side toward the minus element.
    const Point cp = c.centroid(f.plus);
    const Point cm = c.centroid(f.minus);
    const double along = (cm[0] - cp[0]) * f.normal[0] + (cm[1] - cp[1]) * f.normal[1] +
                         (cm[2] - cp[2]) * f.normal[2];
    CHECK(along > 0.0);
  }
}

TEST_CASE("3D bisection closure keeps conformity") {
  Mesh m = Mesh::cube(0);
  std::mt19937 rng(5);
  for (int round = 0; round < 6; ++round) {
    std::vector<int> marked;
    for (int e = 0; e < m.num_elements(); ++e)
      if (rng() % 3 == 0) marked.push_back(e);
    if (marked.empty()) marked.push_back(0);
    m = refine(m, marked).mesh;
    CHECK_NOTHROW(m.conformity_check());
    CHECK(m.total_volume() == doctest::Approx(1.0).epsilon(1e-12));
  }
}
