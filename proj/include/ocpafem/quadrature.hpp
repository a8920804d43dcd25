#ifndef OCPAFEM_QUADRATURE_HPP
#define OCPAFEM_QUADRATURE_HPP

#include <array>
#include <functional>
#include <vector>

#include "ocpafem/mesh.hpp"

namespace ocpafem {

/// Quadrature rule on the reference simplex, stored in barycentric
/// coordinates. Weights are positive and sum to the reference volume
/// (1/2 in 2D, 1/6 in 3D); all monomials of total degree <= degree are
/// integrated exactly.
struct QuadRule {
  int dim = 0;
  int degree = 0;
  std::vector<std::array<double, 4>> points;  // barycentric, last entry unused in 2D
  std::vector<double> weights;

  int size() const { return static_cast<int>(weights.size()); }
};

/// Rule of at least the requested exactness degree. Supported:
/// dim 2 with degree <= 19, dim 3 with degree <= 14 (the degrees the
/// experiments use); anything else throws. Rules are cached; the returned
/// reference stays valid for the program lifetime.
const QuadRule& rule(int dim, int degree);

/// Maximum error-integration degree per dimension (19 in 2D, 14 in 3D).
int error_degree(int dim);

/// Integrate f over one element by affine-mapping the rule of the given
/// degree. Throws if f produces a non-finite value.
double integrate(const Mesh& mesh, int element,
                 const std::function<double(const Point&)>& f, int degree);

/// Physical coordinates of the quadrature points of `rule` mapped onto an
/// element, plus the common weight scale |T| / ref_volume.
struct MappedRule {
  std::vector<Point> points;
  double jacobian;  // multiply rule weights by this
};
MappedRule map_rule(const Mesh& mesh, int element, const QuadRule& rule);

}  // namespace ocpafem

#endif
