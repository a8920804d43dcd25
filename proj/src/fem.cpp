#include "ocpafem/fem.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ocpafem {

namespace {

double dot3(const Point& a, const Point& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

}  // namespace

P1Function P1Function::zeros(const Mesh& m, bool dirichlet) {
  P1Function f;
  f.mesh = &m;
  f.values = Eigen::VectorXd::Zero(m.num_vertices());
  f.dirichlet = dirichlet;
  return f;
}

double P1Function::eval(int element, const std::array<double, 4>& bary) const {
  const auto& el = mesh->element(element);
  double s = 0.0;
  for (int i = 0; i < mesh->verts_per_element(); ++i) s += bary[i] * values[el[i]];
  return s;
}

double P1Function::eval_at(int element, const Point& x) const {
  // lambda_i(x) = 1/(d+1) + grad(lambda_i) . (x - centroid)
  const auto& el = mesh->element(element);
  const auto& g = mesh->barycentric_gradients(element);
  const Point c = mesh->centroid(element);
  const Point dx{x[0] - c[0], x[1] - c[1], x[2] - c[2]};
  const int nv = mesh->verts_per_element();
  double s = 0.0;
  for (int i = 0; i < nv; ++i)
    s += values[el[i]] * (1.0 / nv + dot3(g[i], dx));
  return s;
}

Point P1Function::grad(int element) const {
  const auto& el = mesh->element(element);
  const auto& g = mesh->barycentric_gradients(element);
  Point out{0, 0, 0};
  for (int i = 0; i < mesh->verts_per_element(); ++i)
    for (int k = 0; k < 3; ++k) out[k] += values[el[i]] * g[i][k];
  return out;
}

void P1Function::enforce_dirichlet() {
  if (!dirichlet) return;
  for (int v = 0; v < mesh->num_vertices(); ++v)
    if (mesh->vertex_on_boundary(v)) values[v] = 0.0;
}

P0Function P0Function::zeros(const Mesh& m) {
  P0Function f;
  f.mesh = &m;
  f.values = Eigen::VectorXd::Zero(m.num_elements());
  return f;
}

P0Function P0Function::constant(const Mesh& m, double c) {
  P0Function f = zeros(m);
  f.values.setConstant(c);
  return f;
}

DofMap::DofMap(const Mesh& m) {
  vertex_to_free.assign(m.num_vertices(), -1);
  for (int v = 0; v < m.num_vertices(); ++v) {
    if (!m.vertex_on_boundary(v)) {
      vertex_to_free[v] = n_free++;
      free_to_vertex.push_back(v);
    }
  }
}

namespace {

// Shared element-loop assembler for matrices over P1 x P1.
template <typename LocalKernel>
SparseMatrix assemble_matrix(const Mesh& m, bool dirichlet, LocalKernel&& local) {
  const DofMap dm(m);
  const int n = dirichlet ? dm.n_free : m.num_vertices();
  const int nv = m.verts_per_element();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(m.num_elements()) * nv * nv);
  std::array<std::array<double, 4>, 4> loc{};
  for (int e = 0; e < m.num_elements(); ++e) {
    local(e, loc);
    const auto& el = m.element(e);
    for (int i = 0; i < nv; ++i) {
      const int gi = dirichlet ? dm.vertex_to_free[el[i]] : el[i];
      if (gi < 0) continue;
      for (int j = 0; j < nv; ++j) {
        const int gj = dirichlet ? dm.vertex_to_free[el[j]] : el[j];
        if (gj < 0) continue;
        trips.emplace_back(gi, gj, loc[i][j]);
      }
    }
  }
  SparseMatrix A(n, n);
  A.setFromTriplets(trips.begin(), trips.end());
  A.makeCompressed();
  return A;
}

}  // namespace

SparseMatrix assemble_stiffness(const Mesh& m, bool dirichlet) {
  const int nv = m.verts_per_element();
  return assemble_matrix(m, dirichlet, [&](int e, auto& loc) {
    const auto& g = m.barycentric_gradients(e);
    const double vol = m.element_volume(e);
    for (int i = 0; i < nv; ++i)
      for (int j = 0; j < nv; ++j) loc[i][j] = vol * dot3(g[i], g[j]);
  });
}

SparseMatrix assemble_mass_p1(const Mesh& m, bool dirichlet) {
  const int nv = m.verts_per_element();
  const double denom = static_cast<double>(nv) * (nv + 1);
  return assemble_matrix(m, dirichlet, [&](int e, auto& loc) {
    const double vol = m.element_volume(e);
    for (int i = 0; i < nv; ++i)
      for (int j = 0; j < nv; ++j) loc[i][j] = vol * (i == j ? 2.0 : 1.0) / denom;
  });
}

SparseMatrix assemble_weighted_mass(const Mesh& m, const ElementField& w, int degree,
                                    bool dirichlet) {
  const QuadRule& q = rule(m.dim(), degree);
  const int nv = m.verts_per_element();
  return assemble_matrix(m, dirichlet, [&](int e, auto& loc) {
    const MappedRule mr = map_rule(m, e, q);
    for (int i = 0; i < nv; ++i) loc[i].fill(0.0);
    for (int k = 0; k < q.size(); ++k) {
      const double wk = w(e, mr.points[k]) * q.weights[k] * mr.jacobian;
      for (int i = 0; i < nv; ++i)
        for (int j = 0; j < nv; ++j)
          loc[i][j] += wk * q.points[k][i] * q.points[k][j];
    }
  });
}

SparseMatrix assemble_weighted_mass(const Mesh& m, const ScalarField& w, int degree,
                                    bool dirichlet) {
  return assemble_weighted_mass(
      m, ElementField([&w](int, const Point& x) { return w(x); }), degree, dirichlet);
}

Eigen::VectorXd assemble_load(const Mesh& m, const ElementField& f, int degree,
                              bool dirichlet) {
  const DofMap dm(m);
  const int n = dirichlet ? dm.n_free : m.num_vertices();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  const QuadRule& q = rule(m.dim(), degree);
  const int nv = m.verts_per_element();
  for (int e = 0; e < m.num_elements(); ++e) {
    const MappedRule mr = map_rule(m, e, q);
    const auto& el = m.element(e);
    for (int k = 0; k < q.size(); ++k) {
      const double fk = f(e, mr.points[k]) * q.weights[k] * mr.jacobian;
      for (int i = 0; i < nv; ++i) {
        const int gi = dirichlet ? dm.vertex_to_free[el[i]] : el[i];
        if (gi >= 0) b[gi] += fk * q.points[k][i];
      }
    }
  }
  return b;
}

Eigen::VectorXd assemble_load(const Mesh& m, const ScalarField& f, int degree,
                              bool dirichlet) {
  return assemble_load(m, ElementField([&f](int, const Point& x) { return f(x); }),
                       degree, dirichlet);
}

Eigen::VectorXd solve_sparse(const SparseMatrix& A, const Eigen::VectorXd& b) {
  if (A.rows() != A.cols() || A.rows() != b.size())
    throw std::runtime_error("solve_sparse: dimension mismatch");
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("solve_sparse: factorization failed (singular matrix): " +
                             lu.lastErrorMessage());
  Eigen::VectorXd x = lu.solve(b);
  double amax = 0.0;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it)
      amax = std::max(amax, std::abs(it.value()));
  const double res = (A * x - b).norm();
  const double bound = 1e-10 * (amax * x.norm() + b.norm());
  if (!(res <= bound || res <= 1e-300))
    throw std::runtime_error("solve_sparse: ill-conditioned system, residual " +
                             std::to_string(res) + " exceeds contract bound " +
                             std::to_string(bound));
  return x;
}

namespace {

// Nonlinear part of the semilinear residual: (a(., y), phi_i) over free dofs.
Eigen::VectorXd semilinear_term(const Mesh& m, const Nonlinearity& a,
                                const P1Function& y, int degree) {
  return assemble_load(
      m,
      ElementField([&](int e, const Point& x) { return a.a(x, y.eval_at(e, x)); }),
      degree, true);
}

}  // namespace

SemilinearResult semilinear_solve(const Mesh& m, const Nonlinearity& a,
                                  const ScalarField& rhs, const P1Function& guess,
                                  int quad_degree) {
  const DofMap dm(m);
  const SparseMatrix A = assemble_stiffness(m, true);
  const Eigen::VectorXd F = assemble_load(m, rhs, quad_degree, true);

  P1Function y = guess;
  y.mesh = &m;
  y.dirichlet = true;
  if (y.values.size() != m.num_vertices()) y.values = Eigen::VectorXd::Zero(m.num_vertices());
  y.enforce_dirichlet();

  auto gather = [&](const P1Function& v) {
    Eigen::VectorXd out(dm.n_free);
    for (int i = 0; i < dm.n_free; ++i) out[i] = v.values[dm.free_to_vertex[i]];
    return out;
  };
  auto scatter = [&](const Eigen::VectorXd& vf, P1Function& v) {
    for (int i = 0; i < dm.n_free; ++i) v.values[dm.free_to_vertex[i]] = vf[i];
  };

  auto residual = [&](const P1Function& v) -> Eigen::VectorXd {
    return A * gather(v) + semilinear_term(m, a, v, quad_degree) - F;
  };

  SemilinearResult out;
  std::vector<double>& hist = out.residual_history;
  Eigen::VectorXd R = residual(y);
  for (int it = 0; it < 50; ++it) {
    const double rinf = R.size() ? R.cwiseAbs().maxCoeff() : 0.0;
    hist.push_back(rinf);
    if (rinf <= 1e-10) {
      out.y = y;
      out.iterations = it;
      return out;
    }
    const SparseMatrix J =
        A + assemble_weighted_mass(
                m, ElementField([&](int e, const Point& x) {
                  return a.da_dy(x, y.eval_at(e, x));
                }),
                quad_degree, true);
    const Eigen::VectorXd delta = solve_sparse(J, -R);

    // Damped update: halve until the residual decreases (up to 30 times).
    const double rnorm = R.norm();
    double alpha = 1.0;
    P1Function trial = y;
    Eigen::VectorXd Rtrial;
    for (int h = 0; h <= 30; ++h) {
      scatter(gather(y) + alpha * delta, trial);
      Rtrial = residual(trial);
      if (Rtrial.norm() < rnorm || h == 30) break;
      alpha *= 0.5;
    }
    y = trial;
    R = std::move(Rtrial);
  }
  hist.push_back(R.cwiseAbs().maxCoeff());
  throw NewtonFailure("semilinear_solve: no convergence after 50 iterations", hist);
}

P0Function project_p0(const Mesh& m, const ScalarField& f, int degree) {
  P0Function out = P0Function::zeros(m);
  for (int e = 0; e < m.num_elements(); ++e)
    out.values[e] = integrate(m, e, f, degree) / m.element_volume(e);
  return out;
}

P0Function project_p0(const P1Function& v) {
  const Mesh& m = *v.mesh;
  P0Function out = P0Function::zeros(m);
  const int nv = m.verts_per_element();
  for (int e = 0; e < m.num_elements(); ++e) {
    const auto& el = m.element(e);
    double s = 0.0;
    for (int i = 0; i < nv; ++i) s += v.values[el[i]];
    out.values[e] = s / nv;
  }
  return out;
}

double ElementwiseLinear::eval(int element, const Point& x) const {
  const Point c = mesh_->centroid(element);
  const auto& a = coeffs_[element];
  return a[0] + a[1] * (x[0] - c[0]) + a[2] * (x[1] - c[1]) + a[3] * (x[2] - c[2]);
}

ElementwiseLinear project_p1_elementwise(const Mesh& m, const ScalarField& f, int degree) {
  const int nb = m.dim() + 1;  // basis {1, x-cx, y-cy[, z-cz]}
  std::vector<std::array<double, 4>> coeffs(m.num_elements(), {0, 0, 0, 0});
  const QuadRule& q = rule(m.dim(), std::max(degree, 2));
  for (int e = 0; e < m.num_elements(); ++e) {
    const MappedRule mr = map_rule(m, e, q);
    const Point c = m.centroid(e);
    Eigen::Matrix4d G = Eigen::Matrix4d::Zero();
    Eigen::Vector4d rhs = Eigen::Vector4d::Zero();
    for (int k = 0; k < q.size(); ++k) {
      const Point& x = mr.points[k];
      const double bas[4] = {1.0, x[0] - c[0], x[1] - c[1], x[2] - c[2]};
      const double wk = q.weights[k] * mr.jacobian;
      const double fk = f(x);
      for (int i = 0; i < nb; ++i) {
        rhs[i] += wk * fk * bas[i];
        for (int j = 0; j < nb; ++j) G(i, j) += wk * bas[i] * bas[j];
      }
    }
    const Eigen::VectorXd sol = G.topLeftCorner(nb, nb).ldlt().solve(rhs.head(nb));
    for (int i = 0; i < nb; ++i) coeffs[e][i] = sol[i];
  }
  return ElementwiseLinear(m, std::move(coeffs));
}

double gradient_jump(const Mesh& m, const P1Function& v, const FaceRecord& face) {
  if (v.mesh != &m) throw std::runtime_error("gradient_jump: field lives on another mesh");
  if (face.boundary())
    throw std::runtime_error("gradient_jump: face is on the boundary");
  // Stored normal points from T+ toward T-, i.e. nu- = normal and
  // nu+ = -normal, so the jump is n . (grad|T- - grad|T+).
  const Point gp = v.grad(face.plus);
  const Point gm = v.grad(face.minus);
  return face.normal[0] * (gm[0] - gp[0]) + face.normal[1] * (gm[1] - gp[1]) +
         face.normal[2] * (gm[2] - gp[2]);
}

ErrorNorms norms(const P1Function& v, const P1Function& w) {
  const Mesh& m = *v.mesh;
  if (w.mesh != v.mesh || w.values.size() != v.values.size())
    throw std::runtime_error("norms: fields live on different meshes");
  const Eigen::VectorXd e = v.values - w.values;
  ErrorNorms out;
  out.linf_nodal = e.size() ? e.cwiseAbs().maxCoeff() : 0.0;
  const int nv = m.verts_per_element();
  const double denom = static_cast<double>(nv) * (nv + 1);
  double l2sq = 0.0, h1sq = 0.0;
  for (int el = 0; el < m.num_elements(); ++el) {
    const auto& ids = m.element(el);
    const double vol = m.element_volume(el);
    double s = 0.0;
    for (int i = 0; i < nv; ++i)
      for (int j = 0; j < nv; ++j)
        s += e[ids[i]] * e[ids[j]] * (i == j ? 2.0 : 1.0);
    l2sq += vol * s / denom;
    const auto& g = m.barycentric_gradients(el);
    Point ge{0, 0, 0};
    for (int i = 0; i < nv; ++i)
      for (int k = 0; k < 3; ++k) ge[k] += e[ids[i]] * g[i][k];
    h1sq += vol * dot3(ge, ge);
  }
  out.l2 = std::sqrt(l2sq);
  out.h1_semi = std::sqrt(h1sq);
  return out;
}

ErrorNorms norms(const P1Function& v, const ScalarField& w, const VectorField& grad_w,
                 int degree) {
  const Mesh& m = *v.mesh;
  const QuadRule& q = rule(m.dim(), degree);
  double l2sq = 0.0, h1sq = 0.0;
  for (int e = 0; e < m.num_elements(); ++e) {
    const MappedRule mr = map_rule(m, e, q);
    const Point gv = v.grad(e);
    for (int k = 0; k < q.size(); ++k) {
      const double diff = v.eval(e, q.points[k]) - w(mr.points[k]);
      const double wk = q.weights[k] * mr.jacobian;
      l2sq += wk * diff * diff;
      const Point gw = grad_w(mr.points[k]);
      const Point gd{gv[0] - gw[0], gv[1] - gw[1], gv[2] - gw[2]};
      h1sq += wk * dot3(gd, gd);
    }
  }
  ErrorNorms out;
  out.l2 = std::sqrt(l2sq);
  out.h1_semi = std::sqrt(h1sq);
  for (int vtx = 0; vtx < m.num_vertices(); ++vtx)
    out.linf_nodal = std::max(out.linf_nodal, std::abs(v.values[vtx] - w(m.vertex(vtx))));
  return out;
}

P1Function prolong_p1(const P1Function& v,
                      const std::vector<std::array<int, 3>>& vertex_parents,
                      const Mesh& fine) {
  P1Function out;
  out.mesh = &fine;
  out.dirichlet = v.dirichlet;
  out.values = Eigen::VectorXd::Zero(fine.num_vertices());
  out.values.head(v.values.size()) = v.values;
  for (const auto& [vid, pa, pb] : vertex_parents)
    out.values[vid] = 0.5 * (out.values[pa] + out.values[pb]);
  out.enforce_dirichlet();
  return out;
}

P0Function prolong_p0(const P0Function& u, const std::vector<int>& origin,
                      const Mesh& fine) {
  P0Function out = P0Function::zeros(fine);
  for (int e = 0; e < fine.num_elements(); ++e) out.values[e] = u.values[origin[e]];
  return out;
}

}  // namespace ocpafem
