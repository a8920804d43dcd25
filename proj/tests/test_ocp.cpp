#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "ocpafem/bench.hpp"
#include "ocpafem/ocp.hpp"
#include "oracle.hpp"

using namespace ocpafem;

namespace {

ControlProblem trivial_problem() {
  ControlProblem pb;
  pb.nu = 1e-2;
  pb.lower = -1.0;
  pb.upper = 1.0;
  pb.nonlinearity = Nonlinearity::arctan();
  pb.source = [](const Point&) { return 0.0; };
  pb.y_omega = [](const Point&) { return 0.0; };
  return pb;
}

}  // namespace

TEST_CASE("project_box") {
  CHECK(project_box(5.0, -40.0, -0.1) == -0.1);
  CHECK(project_box(-50.0, -40.0, -0.1) == -40.0);
  CHECK(project_box(-3.0, -40.0, -0.1) == -3.0);
  CHECK_THROWS(project_box(0.0, 1.0, -1.0));
}

TEST_CASE("problem validation") {
  ControlProblem pb = trivial_problem();
  pb.nu = 0.0;
  CHECK_THROWS(pb.validate());
  pb = trivial_problem();
  pb.lower = 2.0;
  CHECK_THROWS(pb.validate());
}

TEST_CASE("cost function") {
  const Mesh m = Mesh::square(1);
  ControlProblem pb = trivial_problem();

  SUBCASE("all zero") {
    CHECK(cost(pb, P1Function::zeros(m, false), P0Function::zeros(m)) == 0.0);
  }

  SUBCASE("interpolated linear desired state and constant control") {
    pb.y_omega = [](const Point& p) { return p[0] - 0.5 * p[1]; };
    P1Function y = P1Function::zeros(m, false);
    for (int v = 0; v < m.num_vertices(); ++v) y.values[v] = pb.y_omega(m.vertex(v));
    const P0Function u = P0Function::constant(m, 3.0);
    // Tracking term vanishes (y interpolates a global linear exactly).
    CHECK(cost(pb, y, u) == doctest::Approx(0.5 * pb.nu * 9.0 * 1.0).epsilon(1e-13));
  }

  SUBCASE("random instance against the reference integrator") {
    pb.y_omega = [](const Point& p) { return std::sin(p[0] + 2.0 * p[1]); };
    P1Function y = P1Function::zeros(m, false);
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> dist(-1, 1);
    for (int v = 0; v < m.num_vertices(); ++v) y.values[v] = dist(rng);
    P0Function u = P0Function::zeros(m);
    for (int e = 0; e < m.num_elements(); ++e) u.values[e] = dist(rng);

    double ref = 0.0;
    for (int e = 0; e < m.num_elements(); ++e) {
      ref += 0.5 * oracle::integrate_checked(m, e, [&](const Point& p) {
        const double d = y.eval_at(e, p) - pb.y_omega(p);
        return d * d;
      });
      ref += 0.5 * pb.nu * u.values[e] * u.values[e] * m.element_volume(e);
    }
    CHECK(cost(pb, y, u) == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("kkt_residual basics") {
  const Mesh m = Mesh::lshape(1);
  const ControlProblem pb = trivial_problem();

  SUBCASE("zero fields with zero data vanish identically") {
    const KktResidual r =
        kkt_residual(pb, m, P1Function::zeros(m), P1Function::zeros(m),
                     P0Function::zeros(m), P0Function::zeros(m), P0Function::zeros(m), 8);
    CHECK(r.inf_norm() == 0.0);
  }

  SUBCASE("block 3 on a fully active-lower element") {
    P0Function chi_a = P0Function::constant(m, 1.0);
    P0Function chi_b = P0Function::zeros(m);
    P0Function u = P0Function::constant(m, pb.lower);
    P1Function p = P1Function::zeros(m);
    for (int v = 0; v < m.num_vertices(); ++v) p.values[v] = 0.3;  // arbitrary
    p.dirichlet = false;
    const KktResidual r =
        kkt_residual(pb, m, P1Function::zeros(m), p, u, chi_a, chi_b, 8);
    CHECK(r.control.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("mesh mismatch is rejected") {
    const Mesh other = Mesh::lshape(0);
    CHECK_THROWS(kkt_residual(pb, m, P1Function::zeros(other), P1Function::zeros(m),
                              P0Function::zeros(m), P0Function::zeros(m),
                              P0Function::zeros(m), 8));
  }
}

TEST_CASE("newton_kkt is exact on affine problems") {
  const Mesh m = Mesh::lshape(1);
  ControlProblem pb = trivial_problem();
  pb.nonlinearity = Nonlinearity::zero();
  pb.y_omega = [](const Point& p) { return p[0] * p[1]; };
  pb.source = [](const Point&) { return 1.0; };
  pb.lower = -100.0;
  pb.upper = 100.0;
  const NewtonKktResult r =
      newton_kkt(pb, m, P0Function::zeros(m), P0Function::zeros(m),
                 P1Function::zeros(m), P1Function::zeros(m), P0Function::zeros(m), 6);
  CHECK(r.iterations == 1);
  const KktResidual res = kkt_residual(pb, m, r.y, r.p, r.u, P0Function::zeros(m),
                                       P0Function::zeros(m), 6);
  CHECK(res.inf_norm() <= 1e-10);
}

TEST_CASE("newton_kkt converges superlinearly on the arctan problem") {
  const Mesh m = Mesh::lshape(1);
  ControlProblem pb = trivial_problem();
  pb.nu = 1e-2;
  pb.lower = -1000.0;
  pb.upper = 1000.0;
  pb.y_omega = [](const Point& p) { return 5.0 * std::sin(p[0]) + p[1]; };
  pb.source = [](const Point&) { return 10.0; };
  const NewtonKktResult r =
      newton_kkt(pb, m, P0Function::zeros(m), P0Function::zeros(m),
                 P1Function::zeros(m), P1Function::zeros(m), P0Function::zeros(m), 8);
  REQUIRE(r.increment_history.size() >= 2);
  const double last = r.increment_history.back();
  const double prev = r.increment_history[r.increment_history.size() - 2];
  CHECK(last / prev < 0.1);

  const KktResidual res = kkt_residual(pb, m, r.y, r.p, r.u, P0Function::zeros(m),
                                       P0Function::zeros(m), 8);
  CHECK(res.inf_norm() <= 1e-8);
}

TEST_CASE("active set solve with wide bounds stays inactive") {
  const Mesh m = Mesh::lshape(1);
  ControlProblem pb = trivial_problem();
  pb.nu = 1e-2;
  pb.lower = -1e9;
  pb.upper = 1e9;
  pb.y_omega = [](const Point& p) { return p[0] + p[1]; };
  pb.source = [](const Point&) { return 2.0; };
  const KktSolution sol = active_set_solve(pb, m);
  CHECK(sol.active_lower.values.maxCoeff() == 0.0);
  CHECK(sol.active_upper.values.maxCoeff() == 0.0);
  const Eigen::VectorXd pm = element_means(sol.p);
  for (int e = 0; e < m.num_elements(); ++e) {
    CHECK(sol.u.values[e] == doctest::Approx(-pm[e] / pb.nu).epsilon(1e-9));
    // Interior: far away from the (huge) bounds.
    CHECK(std::abs(sol.u.values[e]) < 1e8);
  }
}

TEST_CASE("nearly pinched bounds still give a feasible control") {
  const Mesh m = Mesh::lshape(1);
  ControlProblem pb = trivial_problem();
  pb.lower = 0.5;
  pb.upper = 0.5 + 1e-9;
  pb.y_omega = [](const Point& p) { return p[0]; };
  pb.source = [](const Point&) { return 1.0; };
  const KktSolution sol = active_set_solve(pb, m);
  for (int e = 0; e < m.num_elements(); ++e) {
    CHECK(sol.u.values[e] >= pb.lower);
    CHECK(sol.u.values[e] <= pb.upper);
  }
}

TEST_CASE("example 1 coarse solve satisfies the projection fixed point") {
  const ManufacturedCase c = example1(1e-3);
  const Mesh m = Mesh::lshape(2);
  const KktSolution sol = active_set_solve(c.problem, m);
  const Eigen::VectorXd pm = element_means(sol.p);
  for (int e = 0; e < m.num_elements(); ++e) {
    const double expect = project_box(-pm[e] / c.problem.nu, c.problem.lower,
                                      c.problem.upper);
    CHECK(std::abs(sol.u.values[e] - expect) <= 1e-9);
    CHECK(sol.active_lower.values[e] * sol.active_upper.values[e] == 0.0);
  }
  // Plugging the converged triple into the residual reproduces the fixed point.
  const KktResidual r = kkt_residual(c.problem, m, sol.y, sol.p, sol.u,
                                     sol.active_lower, sol.active_upper,
                                     c.problem.assembly_degree());
  CHECK(r.inf_norm() <= 1e-10);
}

TEST_CASE("linear-quadratic symmetry: negating data negates the solution") {
  const Mesh m = Mesh::square(2);
  ControlProblem pb;
  pb.nu = 1e-2;
  pb.lower = -5.0;
  pb.upper = 5.0;
  pb.nonlinearity = Nonlinearity::zero();
  pb.y_omega = [](const Point& p) { return p[0] * p[1]; };
  pb.source = [](const Point& p) { return 1.0 + p[1]; };
  const KktSolution a = active_set_solve(pb, m);

  ControlProblem neg = pb;
  neg.y_omega = [](const Point& p) { return -p[0] * p[1]; };
  neg.source = [](const Point& p) { return -(1.0 + p[1]); };
  const KktSolution b = active_set_solve(neg, m);

  CHECK((a.y.values + b.y.values).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((a.p.values + b.p.values).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((a.u.values + b.u.values).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("active set solve is deterministic") {
  const ManufacturedCase c = example1(1e-3);
  const Mesh m = Mesh::lshape(2);
  const KktSolution a = active_set_solve(c.problem, m);
  const KktSolution b = active_set_solve(c.problem, m);
  CHECK(std::memcmp(a.y.values.data(), b.y.values.data(),
                    sizeof(double) * a.y.values.size()) == 0);
  CHECK(std::memcmp(a.p.values.data(), b.p.values.data(),
                    sizeof(double) * a.p.values.size()) == 0);
  CHECK(std::memcmp(a.u.values.data(), b.u.values.data(),
                    sizeof(double) * a.u.values.size()) == 0);
  CHECK(a.newton_iters == b.newton_iters);
  CHECK(a.active_set_iters == b.active_set_iters);
}

TEST_CASE("element means agree with the exact vertex average") {
  const Mesh m = Mesh::lshape(1);
  P1Function p = P1Function::zeros(m, false);
  for (int v = 0; v < m.num_vertices(); ++v)
    p.values[v] = 1.0 + m.vertex(v)[0] - 2.0 * m.vertex(v)[1];
  const Eigen::VectorXd means = element_means(p);
  for (int e = 0; e < m.num_elements(); ++e) {
    const Point c = m.centroid(e);
    CHECK(means[e] == doctest::Approx(1.0 + c[0] - 2.0 * c[1]).epsilon(1e-14));
  }
}
