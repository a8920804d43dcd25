#ifndef OCPAFEM_OCP_HPP
#define OCPAFEM_OCP_HPP

#include <optional>
#include <vector>

#include "ocpafem/fem.hpp"
#include "ocpafem/nonlinearity.hpp"

namespace ocpafem {

/// Data of the control-constrained semilinear optimal control problem
///   min 1/2 ||y - y_omega||^2 + nu/2 ||u||^2
///   s.t. -Lap y + a(., y) = u + f,  y = 0 on the boundary,
///        lower <= u <= upper.
struct ControlProblem {
  double nu = 1.0;
  double lower = 0.0;
  double upper = 1.0;
  ScalarField y_omega;
  ScalarField source;  // extra source term f
  Nonlinearity nonlinearity = Nonlinearity::zero();
  std::optional<double> theta;  // sparsity weight, L1 extension only

  void validate() const;
  /// Quadrature degree for assembly integrals (override wins, else the
  /// nonlinearity's recommendation, floored at 2).
  int assembly_degree(int override_degree = -1) const;
};

/// Converged discrete KKT triple with its active sets.
struct KktSolution {
  P1Function y;
  P1Function p;
  P0Function u;
  P0Function active_lower;  // values in {0,1}
  P0Function active_upper;
  int newton_iters = 0;      // accumulated over the active set loop
  int active_set_iters = 0;  // outer iterations until the sets froze
};

/// min(upper, max(v, lower)); throws if lower > upper.
double project_box(double v, double lower, double upper);

/// Elementwise means of a P1 field (the L2 projection onto constants).
Eigen::VectorXd element_means(const P1Function& v);

/// Tracking cost 1/2||y - y_omega||^2 + nu/2 ||u||^2, with the tracking
/// term integrated at the error-quadrature degree.
double cost(const ControlProblem& pb, const P1Function& y, const P0Function& u);

/// The three residual blocks of the discrete optimality operator at
/// (y, p, u) with the active sets frozen: state equation against P1 hats
/// (rhs (f + u, v)), adjoint equation against P1 hats, and the elementwise
/// control relation 1/nu mean(p) (1 - chi_a - chi_b) + u - a chi_a - b chi_b.
struct KktResidual {
  Eigen::VectorXd state;    // free P1 dofs
  Eigen::VectorXd adjoint;  // free P1 dofs
  Eigen::VectorXd control;  // per element
  double inf_norm() const;
};
KktResidual kkt_residual(const ControlProblem& pb, const Mesh& mesh,
                         const P1Function& y, const P1Function& p, const P0Function& u,
                         const P0Function& chi_a, const P0Function& chi_b,
                         int quad_degree);

/// Newton iteration on the coupled linearized optimality system with the
/// active sets frozen. Stops when the executed increment satisfies
/// max(||dy||_inf, ||dp||_inf, ||du||_inf) < 1e-8 (or the residual is
/// already at machine level); damping by residual-norm halving engages
/// only when a full step would increase the residual. Throws NewtonFailure
/// after 50 iterations.
struct NewtonKktResult {
  P1Function y;
  P1Function p;
  P0Function u;
  int iterations = 0;
  std::vector<double> increment_history;
};
NewtonKktResult newton_kkt(const ControlProblem& pb, const Mesh& mesh,
                           const P0Function& chi_a, const P0Function& chi_b,
                           const P1Function& y0, const P1Function& p0,
                           const P0Function& u0, int quad_degree);

/// Primal-dual active set loop: alternate newton_kkt with the update
/// chi_a = 1 iff -mean(p)/nu < lower, chi_b = 1 iff -mean(p)/nu > upper
/// (ties stay inactive), until the sets are unchanged. Initial sets are
/// all-inactive. Throws after 100 outer iterations.
KktSolution active_set_solve(const ControlProblem& pb, const Mesh& mesh,
                             const P1Function& y0, const P1Function& p0,
                             const P0Function& u0, int quad_degree_override = -1);
KktSolution active_set_solve(const ControlProblem& pb, const Mesh& mesh,
                             int quad_degree_override = -1);  // zero guess

}  // namespace ocpafem

#endif
