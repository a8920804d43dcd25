#ifndef OCPAFEM_NONLINEARITY_HPP
#define OCPAFEM_NONLINEARITY_HPP

#include <functional>
#include <string>

#include "ocpafem/mesh.hpp"

namespace ocpafem {

/// The semilinear term a(x, y) with its first two y-derivatives.
///
/// Contract (assumptions on the admissible class): a is C^2 in y with
/// da_dy >= 0 everywhere, and a(., 0) is square-integrable. All catalog
/// entries depend on y only, but the x argument is kept for generality.
struct Nonlinearity {
  std::string name;
  std::function<double(const Point&, double)> a;
  std::function<double(const Point&, double)> da_dy;
  std::function<double(const Point&, double)> d2a_dy2;
  /// Suggested quadrature degree for assembling terms containing a.
  int quad_degree = 2;

  static Nonlinearity zero();
  static Nonlinearity linear(double c);
  static Nonlinearity arctan();
  static Nonlinearity a1();  // 10 y^3 - 2
  static Nonlinearity a2();  // 10 arctan(80 y) - 5
  static Nonlinearity a3();  // 10 sinh(3 y) - 2

  /// Catalog lookup by tag: zero | linear | arctan | a1 | a2 | a3.
  static Nonlinearity by_name(const std::string& tag);
};

}  // namespace ocpafem

#endif
