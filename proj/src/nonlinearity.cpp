#include "ocpafem/nonlinearity.hpp"

#include <cmath>
#include <stdexcept>

namespace ocpafem {

Nonlinearity Nonlinearity::zero() {
  Nonlinearity n;
  n.name = "zero";
  n.a = [](const Point&, double) { return 0.0; };
  n.da_dy = [](const Point&, double) { return 0.0; };
  n.d2a_dy2 = [](const Point&, double) { return 0.0; };
  n.quad_degree = 2;
  return n;
}

Nonlinearity Nonlinearity::linear(double c) {
  if (c < 0.0) throw std::runtime_error("Nonlinearity::linear: coefficient must be >= 0");
  Nonlinearity n;
  n.name = "linear";
  n.a = [c](const Point&, double y) { return c * y; };
  n.da_dy = [c](const Point&, double) { return c; };
  n.d2a_dy2 = [](const Point&, double) { return 0.0; };
  n.quad_degree = 2;
  return n;
}

Nonlinearity Nonlinearity::arctan() {
  Nonlinearity n;
  n.name = "arctan";
  n.a = [](const Point&, double y) { return std::atan(y); };
  n.da_dy = [](const Point&, double y) { return 1.0 / (1.0 + y * y); };
  n.d2a_dy2 = [](const Point&, double y) {
    const double s = 1.0 + y * y;
    return -2.0 * y / (s * s);
  };
  n.quad_degree = 8;
  return n;
}

Nonlinearity Nonlinearity::a1() {
  Nonlinearity n;
  n.name = "a1";
  n.a = [](const Point&, double y) { return 10.0 * y * y * y - 2.0; };
  n.da_dy = [](const Point&, double y) { return 30.0 * y * y; };
  n.d2a_dy2 = [](const Point&, double y) { return 60.0 * y; };
  n.quad_degree = 5;
  return n;
}

Nonlinearity Nonlinearity::a2() {
  Nonlinearity n;
  n.name = "a2";
  n.a = [](const Point&, double y) { return 10.0 * std::atan(80.0 * y) - 5.0; };
  n.da_dy = [](const Point&, double y) {
    return 800.0 / (1.0 + 6400.0 * y * y);
  };
  n.d2a_dy2 = [](const Point&, double y) {
    const double s = 1.0 + 6400.0 * y * y;
    return -800.0 * 12800.0 * y / (s * s);
  };
  n.quad_degree = 12;
  return n;
}

Nonlinearity Nonlinearity::a3() {
  Nonlinearity n;
  n.name = "a3";
  n.a = [](const Point&, double y) { return 10.0 * std::sinh(3.0 * y) - 2.0; };
  n.da_dy = [](const Point&, double y) { return 30.0 * std::cosh(3.0 * y); };
  n.d2a_dy2 = [](const Point&, double y) { return 90.0 * std::sinh(3.0 * y); };
  n.quad_degree = 12;
  return n;
}

Nonlinearity Nonlinearity::by_name(const std::string& tag) {
  if (tag == "zero") return zero();
  if (tag == "linear") return linear(1.0);
  if (tag == "arctan") return arctan();
  if (tag == "a1") return a1();
  if (tag == "a2") return a2();
  if (tag == "a3") return a3();
  throw std::runtime_error("Nonlinearity::by_name: unknown tag '" + tag + "'");
}

}  // namespace ocpafem
