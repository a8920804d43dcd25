#include "ocpafem/estimator.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace ocpafem {

namespace {

// Element residual term h_T^2 int_T r(x)^2 at the error-quadrature degree.
void add_element_residuals(const Mesh& m, const ElementField& r, IndicatorField& out) {
  const QuadRule& q = rule(m.dim(), error_degree(m.dim()));
  for (int e = 0; e < m.num_elements(); ++e) {
    const MappedRule mr = map_rule(m, e, q);
    double s = 0.0;
    for (int k = 0; k < q.size(); ++k) {
      const double v = r(e, mr.points[k]);
      s += q.weights[k] * v * v;
    }
    const double h = m.element_diameter(e);
    out.values[e] += h * h * s * mr.jacobian;
  }
}

// Jump terms: each interior face contributes h_T |S| jump^2 to both of its
// elements, with the owning element's diameter as weight.
void add_jump_terms(const Mesh& m, const P1Function& v, IndicatorField& out) {
  for (const auto& f : m.interior_faces()) {
    const double j = gradient_jump(m, v, f);
    const double js = j * j * f.measure;
    out.values[f.plus] += m.element_diameter(f.plus) * js;
    out.values[f.minus] += m.element_diameter(f.minus) * js;
  }
}

IndicatorField zeros(const Mesh& m, std::string kind) {
  IndicatorField out;
  out.mesh = &m;
  out.values = Eigen::VectorXd::Zero(m.num_elements());
  out.kind = std::move(kind);
  return out;
}

// Linear-scan point location via barycentric coordinates; remembers the
// last hit since consecutive queries tend to be close.
struct Locator {
  const Mesh* mesh;
  mutable int hint = 0;

  int locate(const Point& x) const {
    const int n = mesh->num_elements();
    for (int probe = 0; probe < n; ++probe) {
      const int e = (hint + probe) % n;
      if (contains(e, x)) {
        hint = e;
        return e;
      }
    }
    throw std::runtime_error("control_tilde: point lies outside the mesh");
  }

  bool contains(int e, const Point& x) const {
    const auto& g = mesh->barycentric_gradients(e);
    const Point c = mesh->centroid(e);
    const int nv = mesh->verts_per_element();
    for (int i = 0; i < nv; ++i) {
      const double lam = 1.0 / nv + g[i][0] * (x[0] - c[0]) + g[i][1] * (x[1] - c[1]) +
                         g[i][2] * (x[2] - c[2]);
      if (lam < -1e-12) return false;
    }
    return true;
  }
};

}  // namespace

IndicatorField indicator_semilinear(const Mesh& mesh, const P1Function& y,
                                    const ScalarField& f, const Nonlinearity& a) {
  IndicatorField out = zeros(mesh, "semilinear");
  add_element_residuals(
      mesh,
      ElementField([&](int e, const Point& x) { return f(x) - a.a(x, y.eval_at(e, x)); }),
      out);
  add_jump_terms(mesh, y, out);
  return out;
}

IndicatorField indicator_state(const Mesh& mesh, const KktSolution& sol,
                               const ControlProblem& pb) {
  IndicatorField out = zeros(mesh, "st");
  add_element_residuals(mesh,
                        ElementField([&](int e, const Point& x) {
                          return pb.source(x) + sol.u.values[e] -
                                 pb.nonlinearity.a(x, sol.y.eval_at(e, x));
                        }),
                        out);
  add_jump_terms(mesh, sol.y, out);
  return out;
}

IndicatorField indicator_adjoint(const Mesh& mesh, const KktSolution& sol,
                                 const ControlProblem& pb) {
  IndicatorField out = zeros(mesh, "ad");
  add_element_residuals(mesh,
                        ElementField([&](int e, const Point& x) {
                          const double yv = sol.y.eval_at(e, x);
                          return yv - pb.y_omega(x) -
                                 pb.nonlinearity.da_dy(x, yv) * sol.p.eval_at(e, x);
                        }),
                        out);
  add_jump_terms(mesh, sol.p, out);
  return out;
}

ScalarField control_tilde(const Mesh& mesh, const P1Function& p,
                          const ControlProblem& pb) {
  auto loc = std::make_shared<Locator>(Locator{&mesh});
  const double nu = pb.nu, lo = pb.lower, hi = pb.upper;
  const P1Function* pp = &p;
  return [loc, pp, nu, lo, hi](const Point& x) {
    const int e = loc->locate(x);
    return project_box(-pp->eval_at(e, x) / nu, lo, hi);
  };
}

IndicatorField indicator_control(const Mesh& mesh, const KktSolution& sol,
                                 const ControlProblem& pb) {
  IndicatorField out = zeros(mesh, "ct");
  const QuadRule& q = rule(mesh.dim(), error_degree(mesh.dim()));
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const MappedRule mr = map_rule(mesh, e, q);
    double s = 0.0;
    for (int k = 0; k < q.size(); ++k) {
      const double ut =
          project_box(-sol.p.eval(e, q.points[k]) / pb.nu, pb.lower, pb.upper);
      const double d = ut - sol.u.values[e];
      s += q.weights[k] * d * d;
    }
    out.values[e] = s * mr.jacobian;
  }
  return out;
}

IndicatorField indicator_competitor_control(const Mesh& mesh, const KktSolution& sol) {
  IndicatorField out = zeros(mesh, "competitor_ct");
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Point g = sol.p.grad(e);
    const double h = mesh.element_diameter(e);
    out.values[e] =
        h * h * mesh.element_volume(e) * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
  }
  return out;
}

IndicatorField indicator_total(const IndicatorField& st, const IndicatorField& ad,
                               const IndicatorField& ct) {
  if (st.mesh != ad.mesh || st.mesh != ct.mesh)
    throw std::runtime_error("indicator_total: fields live on different meshes");
  IndicatorField out = zeros(*st.mesh, "ocp");
  out.values = st.values + ad.values + ct.values;
  return out;
}

IndicatorField oscillation(const Mesh& mesh, const ScalarField& w) {
  IndicatorField out = zeros(mesh, "osc");
  const int deg = error_degree(mesh.dim());
  const ElementwiseLinear pw = project_p1_elementwise(mesh, w, deg);
  const QuadRule& q = rule(mesh.dim(), deg);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const MappedRule mr = map_rule(mesh, e, q);
    double s = 0.0;
    for (int k = 0; k < q.size(); ++k) {
      const double d = w(mr.points[k]) - pw.eval(e, mr.points[k]);
      s += q.weights[k] * d * d;
    }
    const double h = mesh.element_diameter(e);
    out.values[e] = h * h * s * mr.jacobian;
  }
  return out;
}

SparseAuxiliary sparse_auxiliary(const Mesh& mesh, const P1Function& p,
                                 const ControlProblem& pb) {
  if (!pb.theta)
    throw std::runtime_error("sparse_auxiliary: problem has no sparsity parameter theta");
  const double theta = *pb.theta;
  auto loc = std::make_shared<Locator>(Locator{&mesh});
  const P1Function* pp = &p;
  const double nu = pb.nu, lo = pb.lower, hi = pb.upper;
  SparseAuxiliary aux;
  aux.lambda_tilde = [loc, pp, theta](const Point& x) {
    const int e = loc->locate(x);
    return project_box(-pp->eval_at(e, x) / theta, -1.0, 1.0);
  };
  aux.u_tilde = [loc, pp, theta, nu, lo, hi](const Point& x) {
    const int e = loc->locate(x);
    const double pv = pp->eval_at(e, x);
    const double lam = project_box(-pv / theta, -1.0, 1.0);
    return project_box(-(pv + theta * lam) / nu, lo, hi);
  };
  return aux;
}

namespace {

IndicatorField l2_mismatch(const Mesh& mesh, const P0Function& discrete,
                           const ElementField& target, std::string kind) {
  IndicatorField out = zeros(mesh, std::move(kind));
  const QuadRule& q = rule(mesh.dim(), error_degree(mesh.dim()));
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const MappedRule mr = map_rule(mesh, e, q);
    double s = 0.0;
    for (int k = 0; k < q.size(); ++k) {
      const double d = target(e, mr.points[k]) - discrete.values[e];
      s += q.weights[k] * d * d;
    }
    out.values[e] = s * mr.jacobian;
  }
  return out;
}

}  // namespace

IndicatorField indicator_subgradient(const Mesh& mesh, const P0Function& lambda,
                                     const P1Function& p, const ControlProblem& pb) {
  if (!pb.theta)
    throw std::runtime_error("indicator_subgradient: problem has no theta");
  const double theta = *pb.theta;
  return l2_mismatch(mesh, lambda,
                     ElementField([&](int e, const Point& x) {
                       return project_box(-p.eval_at(e, x) / theta, -1.0, 1.0);
                     }),
                     "sg");
}

IndicatorField indicator_control_sparse(const Mesh& mesh, const P0Function& u,
                                        const P1Function& p, const ControlProblem& pb) {
  if (!pb.theta)
    throw std::runtime_error("indicator_control_sparse: problem has no theta");
  const double theta = *pb.theta;
  return l2_mismatch(mesh, u,
                     ElementField([&](int e, const Point& x) {
                       const double pv = p.eval_at(e, x);
                       const double lam = project_box(-pv / theta, -1.0, 1.0);
                       return project_box(-(pv + theta * lam) / pb.nu, pb.lower, pb.upper);
                     }),
                     "ct");
}

}  // namespace ocpafem
