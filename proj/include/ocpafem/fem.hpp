#ifndef OCPAFEM_FEM_HPP
#define OCPAFEM_FEM_HPP

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <functional>
#include <optional>
#include <vector>

#include "ocpafem/mesh.hpp"
#include "ocpafem/nonlinearity.hpp"
#include "ocpafem/quadrature.hpp"

namespace ocpafem {

using ScalarField = std::function<double(const Point&)>;
using VectorField = std::function<Point(const Point&)>;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Continuous piecewise-linear function, stored as one value per vertex.
/// With `dirichlet` set, boundary-vertex values are pinned to zero.
struct P1Function {
  const Mesh* mesh = nullptr;
  Eigen::VectorXd values;
  bool dirichlet = false;

  static P1Function zeros(const Mesh& m, bool dirichlet = true);

  double eval(int element, const std::array<double, 4>& bary) const;
  double eval_at(int element, const Point& physical) const;
  /// Gradient on one element (constant for P1).
  Point grad(int element) const;
  double max_abs() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }
  void enforce_dirichlet();
};

/// Piecewise-constant function, one value per element.
struct P0Function {
  const Mesh* mesh = nullptr;
  Eigen::VectorXd values;

  static P0Function zeros(const Mesh& m);
  static P0Function constant(const Mesh& m, double c);
  double max_abs() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }
};

/// Numbering of the unconstrained (interior) vertices for H^1_0 systems.
struct DofMap {
  explicit DofMap(const Mesh& m);
  int n_free = 0;
  std::vector<int> vertex_to_free;  // -1 for boundary vertices
  std::vector<int> free_to_vertex;
};

/// Stiffness matrix (grad phi_i, grad phi_j). With `dirichlet`, rows and
/// columns of boundary vertices are eliminated symmetrically (the system
/// is indexed by DofMap free numbering); otherwise all vertices.
SparseMatrix assemble_stiffness(const Mesh& m, bool dirichlet);

/// P1 mass matrix (phi_i, phi_j); same indexing convention.
SparseMatrix assemble_mass_p1(const Mesh& m, bool dirichlet);

/// Coefficient known element by element (e.g. built from a discrete field).
using ElementField = std::function<double(int element, const Point&)>;

/// Mass matrix weighted by a pointwise coefficient, (w phi_i, phi_j),
/// assembled with the given quadrature degree.
SparseMatrix assemble_weighted_mass(const Mesh& m, const ScalarField& w, int degree,
                                    bool dirichlet);
SparseMatrix assemble_weighted_mass(const Mesh& m, const ElementField& w, int degree,
                                    bool dirichlet);

/// Load vector (f, phi_i) over free vertices (dirichlet) or all vertices.
Eigen::VectorXd assemble_load(const Mesh& m, const ScalarField& f, int degree,
                              bool dirichlet);
Eigen::VectorXd assemble_load(const Mesh& m, const ElementField& f, int degree,
                              bool dirichlet);

/// Direct sparse solve with a residual contract of
/// ||Ax-b|| <= 1e-10 (||A||_max ||x|| + ||b||). Deterministic. Throws on
/// singular or numerically unusable factorizations.
Eigen::VectorXd solve_sparse(const SparseMatrix& A, const Eigen::VectorXd& b);

struct NewtonFailure : std::runtime_error {
  std::vector<double> residual_history;
  explicit NewtonFailure(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), residual_history(std::move(history)) {}
};

/// Galerkin solution of the semilinear problem
///   (grad y, grad v) + (a(., y), v) = (rhs, v)  for all v in the P1
/// Dirichlet space, by damped Newton. Stops when the nonlinear residual
/// vector is below 1e-10 in the max norm; throws NewtonFailure after 50
/// iterations.
struct SemilinearResult {
  P1Function y;
  int iterations = 0;
  std::vector<double> residual_history;
};
SemilinearResult semilinear_solve(const Mesh& m, const Nonlinearity& a,
                                  const ScalarField& rhs, const P1Function& guess,
                                  int quad_degree);

/// Elementwise L2 projection onto piecewise constants: value on T is the
/// mean of f over T.
P0Function project_p0(const Mesh& m, const ScalarField& f, int degree);
P0Function project_p0(const P1Function& v);  // exact vertex average

/// Elementwise (discontinuous) L2-best linear fit. eval() gives the fitted
/// value; the residual f - fit is L2-orthogonal to linears element by
/// element.
class ElementwiseLinear {
 public:
  ElementwiseLinear(const Mesh& m, std::vector<std::array<double, 4>> coeffs)
      : mesh_(&m), coeffs_(std::move(coeffs)) {}
  double eval(int element, const Point& x) const;

 private:
  const Mesh* mesh_;
  std::vector<std::array<double, 4>> coeffs_;  // value at centroid + gradient
};
ElementwiseLinear project_p1_elementwise(const Mesh& m, const ScalarField& f, int degree);

/// Jump of the normal gradient across an interior face:
/// nu+ . grad(v)|T+ + nu- . grad(v)|T-  with nu+- pointing toward T+-.
/// Constant per face for P1. Throws for boundary faces.
double gradient_jump(const Mesh& m, const P1Function& v, const FaceRecord& face);

struct ErrorNorms {
  double l2 = 0.0;
  double h1_semi = 0.0;
  double linf_nodal = 0.0;
};

/// Norms of (v - w) for a discrete comparator.
ErrorNorms norms(const P1Function& v, const P1Function& w);
/// Norms of (v - w) for an exact comparator given by callables; integrals
/// use the given quadrature degree (pass error_degree(dim) for reports).
ErrorNorms norms(const P1Function& v, const ScalarField& w, const VectorField& grad_w,
                 int degree);

/// Exact transfer to a refinement: P1 by nodal interpolation (new vertices
/// are edge midpoints, evaluated in creation order), P0 by inheritance from
/// the ancestor element. `fine` is the refined mesh the provenance data
/// refers to (possibly relocated after a move).
P1Function prolong_p1(const P1Function& v,
                      const std::vector<std::array<int, 3>>& vertex_parents,
                      const Mesh& fine);
P0Function prolong_p0(const P0Function& u, const std::vector<int>& origin,
                      const Mesh& fine);

}  // namespace ocpafem

#endif
