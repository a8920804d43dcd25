#include "ocpafem/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace ocpafem {

namespace {

// Gauss-Jacobi nodes/weights for the weight (1-x)^alpha on [0,1]
// (alpha = 0 is Gauss-Legendre), via Golub-Welsch on the symmetric
// recurrence of the Jacobi polynomials P^(alpha,0) on [-1,1].
void gauss_jacobi01(int n, int alpha, std::vector<double>& x, std::vector<double>& w) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  const double a = alpha, b = 0.0;
  for (int k = 0; k < n; ++k) {
    double diag;
    if (k == 0)
      diag = (b - a) / (a + b + 2.0);
    else {
      const double s = 2.0 * k + a + b;
      diag = (b * b - a * a) / (s * (s + 2.0));
    }
    J(k, k) = diag;
    if (k >= 1) {
      const double s = 2.0 * k + a + b;
      const double off = std::sqrt(4.0 * k * (k + a) * (k + b) * (k + a + b) /
                                   (s * s * (s + 1.0) * (s - 1.0)));
      J(k, k - 1) = J(k - 1, k) = off;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("quadrature: eigensolve failed");
  // mu0 = int_{-1}^{1} (1-t)^a dt = 2^(a+1)/(a+1)
  const double mu0 = std::pow(2.0, a + 1.0) / (a + 1.0);
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    const double t = es.eigenvalues()(i);
    x[i] = 0.5 * (1.0 + t);  // map [-1,1] -> [0,1]
    const double v0 = es.eigenvectors()(0, i);
    // int_0^1 (1-u)^a g(u) du = 2^(-a-1) int_{-1}^1 (1-t)^a g((1+t)/2) dt
    w[i] = mu0 * v0 * v0 * std::pow(2.0, -a - 1.0);
  }
}

// Conical product (collapsed coordinate) rule: exact for total degree
// 2n-1 with n points per axis, all weights positive.
QuadRule build_rule(int dim, int degree) {
  const int n = (degree + 2) / 2;  // 2n-1 >= degree
  QuadRule q;
  q.dim = dim;
  q.degree = 2 * n - 1;
  std::vector<double> xu, wu, xv, wv, xw, ww;
  if (dim == 2) {
    gauss_jacobi01(n, 1, xu, wu);  // weight (1-u)
    gauss_jacobi01(n, 0, xv, wv);
    // x = u, y = v(1-u); dx dy = (1-u) du dv
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double x = xu[i];
        const double y = xv[j] * (1.0 - xu[i]);
        q.points.push_back({1.0 - x - y, x, y, 0.0});
        q.weights.push_back(wu[i] * wv[j]);
      }
    }
  } else {
    gauss_jacobi01(n, 2, xu, wu);  // weight (1-u)^2
    gauss_jacobi01(n, 1, xv, wv);  // weight (1-v)
    gauss_jacobi01(n, 0, xw, ww);
    // x = u, y = v(1-u), z = w(1-u)(1-v); Jacobian (1-u)^2 (1-v)
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
          const double x = xu[i];
          const double y = xv[j] * (1.0 - xu[i]);
          const double z = xw[k] * (1.0 - xu[i]) * (1.0 - xv[j]);
          q.points.push_back({1.0 - x - y - z, x, y, z});
          q.weights.push_back(wu[i] * wv[j] * ww[k]);
        }
      }
    }
  }
  return q;
}

}  // namespace

int error_degree(int dim) { return dim == 2 ? 19 : 14; }

const QuadRule& rule(int dim, int degree) {
  if (dim != 2 && dim != 3)
    throw std::runtime_error("quadrature: dim must be 2 or 3");
  if (degree < 0 || degree > error_degree(dim))
    throw std::runtime_error("quadrature: unsupported degree " + std::to_string(degree) +
                             " in dimension " + std::to_string(dim));
  static std::mutex mu;
  static std::map<std::pair<int, int>, QuadRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find({dim, degree});
  if (it == cache.end())
    it = cache.emplace(std::make_pair(dim, degree), build_rule(dim, degree)).first;
  return it->second;
}

MappedRule map_rule(const Mesh& mesh, int element, const QuadRule& q) {
  MappedRule out;
  out.points.resize(q.size());
  const auto& el = mesh.element(element);
  const int nv = mesh.verts_per_element();
  for (int i = 0; i < q.size(); ++i) {
    Point p{0, 0, 0};
    for (int v = 0; v < nv; ++v) {
      const Point& pv = mesh.vertex(el[v]);
      for (int k = 0; k < 3; ++k) p[k] += q.points[i][v] * pv[k];
    }
    out.points[i] = p;
  }
  // Rule weights sum to the reference volume 1/d!, so the scale is
  // |T| * d! = |det J|.
  const double ref_vol = mesh.dim() == 2 ? 0.5 : 1.0 / 6.0;
  out.jacobian = mesh.element_volume(element) / ref_vol;
  return out;
}

double integrate(const Mesh& mesh, int element,
                 const std::function<double(const Point&)>& f, int degree) {
  const QuadRule& q = rule(mesh.dim(), degree);
  const MappedRule m = map_rule(mesh, element, q);
  double sum = 0.0;
  for (int i = 0; i < q.size(); ++i) {
    const double val = f(m.points[i]);
    if (!std::isfinite(val))
      throw std::runtime_error("integrate: integrand returned a non-finite value");
    sum += q.weights[i] * val;
  }
  return sum * m.jacobian;
}

}  // namespace ocpafem
