#include "ocpafem/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ocpafem {

void ControlProblem::validate() const {
  if (!(nu > 0.0)) throw std::runtime_error("ControlProblem: nu must be positive");
  if (!(lower < upper)) throw std::runtime_error("ControlProblem: requires lower < upper");
  if (theta && !(*theta > 0.0))
    throw std::runtime_error("ControlProblem: theta must be positive when set");
}

int ControlProblem::assembly_degree(int override_degree) const {
  if (override_degree > 0) return override_degree;
  return std::max(2, nonlinearity.quad_degree);
}

double project_box(double v, double lower, double upper) {
  if (lower > upper) throw std::runtime_error("project_box: lower > upper");
  return std::min(upper, std::max(v, lower));
}

Eigen::VectorXd element_means(const P1Function& v) {
  const Mesh& m = *v.mesh;
  const int nv = m.verts_per_element();
  Eigen::VectorXd out(m.num_elements());
  for (int e = 0; e < m.num_elements(); ++e) {
    const auto& el = m.element(e);
    double s = 0.0;
    for (int i = 0; i < nv; ++i) s += v.values[el[i]];
    out[e] = s / nv;
  }
  return out;
}

double cost(const ControlProblem& pb, const P1Function& y, const P0Function& u) {
  const Mesh& m = *y.mesh;
  const QuadRule& q = rule(m.dim(), error_degree(m.dim()));
  double track = 0.0;
  for (int e = 0; e < m.num_elements(); ++e) {
    const MappedRule mr = map_rule(m, e, q);
    for (int k = 0; k < q.size(); ++k) {
      const double d = y.eval(e, q.points[k]) - pb.y_omega(mr.points[k]);
      track += q.weights[k] * mr.jacobian * d * d;
    }
  }
  double ctrl = 0.0;
  for (int e = 0; e < m.num_elements(); ++e)
    ctrl += u.values[e] * u.values[e] * m.element_volume(e);
  return 0.5 * track + 0.5 * pb.nu * ctrl;
}

double KktResidual::inf_norm() const {
  double r = 0.0;
  if (state.size()) r = std::max(r, state.cwiseAbs().maxCoeff());
  if (adjoint.size()) r = std::max(r, adjoint.cwiseAbs().maxCoeff());
  if (control.size()) r = std::max(r, control.cwiseAbs().maxCoeff());
  return r;
}

namespace {

// Shared assembled pieces of one linearization point.
struct KktWork {
  DofMap dm;
  SparseMatrix A;   // stiffness, free dofs
  SparseMatrix M;   // plain mass, free dofs
  Eigen::VectorXd Ff;  // (f, phi_i)
  Eigen::VectorXd Fy;  // (y_omega, phi_i)

  KktWork(const ControlProblem& pb, const Mesh& m, int deg)
      : dm(m),
        A(assemble_stiffness(m, true)),
        M(assemble_mass_p1(m, true)),
        Ff(assemble_load(m, pb.source, deg, true)),
        Fy(assemble_load(m, pb.y_omega, deg, true)) {}

  Eigen::VectorXd gather(const P1Function& v) const {
    Eigen::VectorXd out(dm.n_free);
    for (int i = 0; i < dm.n_free; ++i) out[i] = v.values[dm.free_to_vertex[i]];
    return out;
  }
  void scatter(const Eigen::VectorXd& vf, P1Function& v) const {
    for (int i = 0; i < dm.n_free; ++i) v.values[dm.free_to_vertex[i]] = vf[i];
  }
};

KktResidual residual_impl(const ControlProblem& pb, const Mesh& m, const KktWork& w,
                          const P1Function& y, const P1Function& p, const P0Function& u,
                          const P0Function& chi_a, const P0Function& chi_b, int deg) {
  const auto& nl = pb.nonlinearity;
  KktResidual r;
  const Eigen::VectorXd yf = w.gather(y);
  const Eigen::VectorXd pf = w.gather(p);

  // (u, phi_i): exact, u is constant per element.
  Eigen::VectorXd Bu = Eigen::VectorXd::Zero(w.dm.n_free);
  const int nv = m.verts_per_element();
  for (int e = 0; e < m.num_elements(); ++e) {
    const auto& el = m.element(e);
    const double c = u.values[e] * m.element_volume(e) / nv;
    for (int i = 0; i < nv; ++i) {
      const int gi = w.dm.vertex_to_free[el[i]];
      if (gi >= 0) Bu[gi] += c;
    }
  }

  const Eigen::VectorXd Na = assemble_load(
      m, ElementField([&](int e, const Point& x) { return nl.a(x, y.eval_at(e, x)); }),
      deg, true);
  const Eigen::VectorXd Nap = assemble_load(
      m,
      ElementField([&](int e, const Point& x) {
        return nl.da_dy(x, y.eval_at(e, x)) * p.eval_at(e, x);
      }),
      deg, true);

  r.state = w.A * yf + Na - Bu - w.Ff;
  r.adjoint = w.A * pf + Nap - w.M * yf + w.Fy;

  const Eigen::VectorXd pmean = element_means(p);
  r.control.resize(m.num_elements());
  for (int e = 0; e < m.num_elements(); ++e) {
    const double inact = 1.0 - chi_a.values[e] - chi_b.values[e];
    r.control[e] = pmean[e] / pb.nu * inact + u.values[e] - pb.lower * chi_a.values[e] -
                   pb.upper * chi_b.values[e];
  }
  return r;
}

}  // namespace

KktResidual kkt_residual(const ControlProblem& pb, const Mesh& mesh,
                         const P1Function& y, const P1Function& p, const P0Function& u,
                         const P0Function& chi_a, const P0Function& chi_b,
                         int quad_degree) {
  if (y.mesh != &mesh || p.mesh != &mesh || u.mesh != &mesh ||
      u.values.size() != mesh.num_elements())
    throw std::runtime_error("kkt_residual: fields do not live on the given mesh");
  const KktWork w(pb, mesh, quad_degree);
  return residual_impl(pb, mesh, w, y, p, u, chi_a, chi_b, quad_degree);
}

NewtonKktResult newton_kkt(const ControlProblem& pb, const Mesh& mesh,
                           const P0Function& chi_a, const P0Function& chi_b,
                           const P1Function& y0, const P1Function& p0,
                           const P0Function& u0, int quad_degree) {
  pb.validate();
  const auto& nl = pb.nonlinearity;
  const KktWork w(pb, mesh, quad_degree);
  const int n = w.dm.n_free;
  const int mele = mesh.num_elements();
  const int nv = mesh.verts_per_element();

  NewtonKktResult res;
  res.y = y0;
  res.p = p0;
  res.u = u0;
  res.y.mesh = res.p.mesh = &mesh;
  res.u.mesh = &mesh;
  res.y.dirichlet = res.p.dirichlet = true;
  res.y.enforce_dirichlet();
  res.p.enforce_dirichlet();

  auto full_residual = [&](const P1Function& y, const P1Function& p, const P0Function& u) {
    return residual_impl(pb, mesh, w, y, p, u, chi_a, chi_b, quad_degree);
  };

  KktResidual R = full_residual(res.y, res.p, res.u);
  for (int it = 0; it < 50; ++it) {
    if (R.inf_norm() < 1e-12) {
      res.iterations = it;
      return res;
    }

    // Jacobian blocks at the current iterate.
    const SparseMatrix May = assemble_weighted_mass(
        mesh,
        ElementField([&](int e, const Point& x) { return nl.da_dy(x, res.y.eval_at(e, x)); }),
        quad_degree, true);
    const SparseMatrix Mayyp = assemble_weighted_mass(
        mesh,
        ElementField([&](int e, const Point& x) {
          return nl.d2a_dy2(x, res.y.eval_at(e, x)) * res.p.eval_at(e, x);
        }),
        quad_degree, true);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(4) * (May.nonZeros() + w.A.nonZeros()) +
                  static_cast<std::size_t>(mele) * (nv + 2));
    auto add_block = [&trips](const SparseMatrix& B, int ro, int co, double s) {
      for (int k = 0; k < B.outerSize(); ++k)
        for (SparseMatrix::InnerIterator jt(B, k); jt; ++jt)
          trips.emplace_back(ro + jt.row(), co + jt.col(), s * jt.value());
    };
    add_block(w.A, 0, 0, 1.0);
    add_block(May, 0, 0, 1.0);
    add_block(w.A, n, n, 1.0);
    add_block(May, n, n, 1.0);
    add_block(Mayyp, n, 0, 1.0);
    add_block(w.M, n, 0, -1.0);
    for (int e = 0; e < mele; ++e) {
      const auto& el = mesh.element(e);
      const double bi = mesh.element_volume(e) / nv;
      const double inact = 1.0 - chi_a.values[e] - chi_b.values[e];
      for (int i = 0; i < nv; ++i) {
        const int gi = w.dm.vertex_to_free[el[i]];
        if (gi < 0) continue;
        trips.emplace_back(gi, 2 * n + e, -bi);                       // -(du, phi_i)
        trips.emplace_back(2 * n + e, n + gi, inact / (pb.nu * nv));  // mean(dp)/nu
      }
      trips.emplace_back(2 * n + e, 2 * n + e, 1.0);
    }
    SparseMatrix J(2 * n + mele, 2 * n + mele);
    J.setFromTriplets(trips.begin(), trips.end());
    J.makeCompressed();

    Eigen::VectorXd rhs(2 * n + mele);
    rhs.segment(0, n) = -R.state;
    rhs.segment(n, n) = -R.adjoint;
    rhs.segment(2 * n, mele) = -R.control;
    const Eigen::VectorXd eta = solve_sparse(J, rhs);

    // Damped update: halve the step until the residual norm decreases.
    const double rnorm = std::sqrt(R.state.squaredNorm() + R.adjoint.squaredNorm() +
                                   R.control.squaredNorm());
    const Eigen::VectorXd yf = w.gather(res.y);
    const Eigen::VectorXd pf = w.gather(res.p);
    const Eigen::VectorXd uf = res.u.values;
    double alpha = 1.0;
    P1Function ytr = res.y, ptr = res.p;
    P0Function utr = res.u;
    KktResidual Rtr;
    for (int h = 0; h <= 30; ++h) {
      w.scatter(yf + alpha * eta.segment(0, n), ytr);
      w.scatter(pf + alpha * eta.segment(n, n), ptr);
      utr.values = uf + alpha * eta.segment(2 * n, mele);
      Rtr = full_residual(ytr, ptr, utr);
      const double rtr = std::sqrt(Rtr.state.squaredNorm() + Rtr.adjoint.squaredNorm() +
                                   Rtr.control.squaredNorm());
      if (rtr < rnorm || h == 30) break;
      alpha *= 0.5;
    }
    res.y = ytr;
    res.p = ptr;
    res.u = utr;
    R = Rtr;

    double inc = alpha * eta.segment(2 * n, mele).cwiseAbs().maxCoeff();
    if (n > 0) {
      inc = std::max(inc, alpha * eta.segment(0, n).cwiseAbs().maxCoeff());
      inc = std::max(inc, alpha * eta.segment(n, n).cwiseAbs().maxCoeff());
    }
    res.increment_history.push_back(inc);
    if (inc < 1e-8) {
      res.iterations = it + 1;
      return res;
    }
  }
  throw NewtonFailure("newton_kkt: no convergence after 50 iterations",
                      res.increment_history);
}

KktSolution active_set_solve(const ControlProblem& pb, const Mesh& mesh,
                             const P1Function& y0, const P1Function& p0,
                             const P0Function& u0, int quad_degree_override) {
  pb.validate();
  const int deg = pb.assembly_degree(quad_degree_override);
  KktSolution sol;
  sol.active_lower = P0Function::zeros(mesh);
  sol.active_upper = P0Function::zeros(mesh);

  P1Function y = y0, p = p0;
  P0Function u = u0;
  for (int j = 0; j < 100; ++j) {
    NewtonKktResult step =
        newton_kkt(pb, mesh, sol.active_lower, sol.active_upper, y, p, u, deg);
    sol.newton_iters += step.iterations;
    y = std::move(step.y);
    p = std::move(step.p);
    u = std::move(step.u);

    const Eigen::VectorXd pmean = element_means(p);
    bool changed = false;
    for (int e = 0; e < mesh.num_elements(); ++e) {
      const double proj = -pmean[e] / pb.nu;
      const double na = proj < pb.lower ? 1.0 : 0.0;
      const double nb = proj > pb.upper ? 1.0 : 0.0;
      if (na != sol.active_lower.values[e] || nb != sol.active_upper.values[e])
        changed = true;
      sol.active_lower.values[e] = na;
      sol.active_upper.values[e] = nb;
    }
    ++sol.active_set_iters;
    if (!changed) {
      sol.y = std::move(y);
      sol.p = std::move(p);
      sol.u = std::move(u);
      // Feasibility is exact by construction of the returned control.
      for (int e = 0; e < mesh.num_elements(); ++e) {
        if (sol.active_lower.values[e] > 0.5)
          sol.u.values[e] = pb.lower;
        else if (sol.active_upper.values[e] > 0.5)
          sol.u.values[e] = pb.upper;
        else
          sol.u.values[e] = project_box(sol.u.values[e], pb.lower, pb.upper);
      }
      return sol;
    }
  }
  throw std::runtime_error("active_set_solve: active sets did not settle within 100 iterations");
}

KktSolution active_set_solve(const ControlProblem& pb, const Mesh& mesh,
                             int quad_degree_override) {
  return active_set_solve(pb, mesh, P1Function::zeros(mesh), P1Function::zeros(mesh),
                          P0Function::zeros(mesh), quad_degree_override);
}

}  // namespace ocpafem
