#ifndef OCPAFEM_ESTIMATOR_HPP
#define OCPAFEM_ESTIMATOR_HPP

#include <string>

#include "ocpafem/ocp.hpp"

namespace ocpafem {

/// Per-element squared indicator values tagged with the estimator they
/// belong to: st | ad | ct | ocp | semilinear | competitor_ct | sg | osc.
struct IndicatorField {
  const Mesh* mesh = nullptr;
  Eigen::VectorXd values;  // squared, nonnegative
  std::string kind;

  double total() const { return std::sqrt(values.sum()); }
  double max() const { return values.size() ? values.maxCoeff() : 0.0; }
};

/// Residual indicator for the plain semilinear equation:
/// h_T^2 ||f - a(., y)||_T^2 + h_T ||[[grad y . n]]||_{dT \ boundary}^2.
/// Each interior face contributes its full jump term to both adjacent
/// elements, weighted by the respective element's h_T.
IndicatorField indicator_semilinear(const Mesh& mesh, const P1Function& y,
                                    const ScalarField& f, const Nonlinearity& a);

/// State-equation indicator of the optimality system: the element residual
/// uses f + u_T - a(., y_T).
IndicatorField indicator_state(const Mesh& mesh, const KktSolution& sol,
                               const ControlProblem& pb);

/// Adjoint indicator: h_T^2 ||y_T - y_omega - da/dy(., y_T) p_T||_T^2 plus
/// the jump terms of p_T; y_omega is sampled pointwise at quadrature nodes.
IndicatorField indicator_adjoint(const Mesh& mesh, const KktSolution& sol,
                                 const ControlProblem& pb);

/// The auxiliary control Pi_[a,b](-p_T / nu) as a pointwise callable
/// (arbitrary points located by element search).
ScalarField control_tilde(const Mesh& mesh, const P1Function& p,
                          const ControlProblem& pb);

/// Control indicator ||u_tilde - u_T||_T^2 with the clipped integrand
/// evaluated at the error-quadrature degree without kink sub-splitting.
IndicatorField indicator_control(const Mesh& mesh, const KktSolution& sol,
                                 const ControlProblem& pb);

/// Competitor control indicator h_T^2 |T| |grad p_T|^2 (squared form of
/// h_T ||grad p_T||_T).
IndicatorField indicator_competitor_control(const Mesh& mesh, const KktSolution& sol);

/// Elementwise sum of squares of the three contributions.
IndicatorField indicator_total(const IndicatorField& st, const IndicatorField& ad,
                               const IndicatorField& ct);

/// Data oscillation osc(w, T)^2 = h_T^2 ||w - P_T w||_T^2 with P_T the
/// elementwise L2 projection onto linears.
IndicatorField oscillation(const Mesh& mesh, const ScalarField& w);

/// Auxiliary fields of the sparse (L1) extension:
/// lambda_tilde = Pi_[-1,1](-p_T / theta),
/// u_tilde = Pi_[a,b](-(p_T + theta lambda_tilde) / nu).
/// Requires pb.theta; throws otherwise.
struct SparseAuxiliary {
  ScalarField lambda_tilde;
  ScalarField u_tilde;
};
SparseAuxiliary sparse_auxiliary(const Mesh& mesh, const P1Function& p,
                                 const ControlProblem& pb);

/// ||lambda_tilde - lambda_T||_T^2 per element.
IndicatorField indicator_subgradient(const Mesh& mesh, const P0Function& lambda,
                                     const P1Function& p, const ControlProblem& pb);

/// ||u_tilde - u_T||_T^2 per element for the sparse auxiliary control.
IndicatorField indicator_control_sparse(const Mesh& mesh, const P0Function& u,
                                        const P1Function& p, const ControlProblem& pb);

}  // namespace ocpafem

#endif
