#include "ocpafem/bench.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace ocpafem {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Polar angle about the reentrant corner, measured from the positive
// x-axis, in [0, 2 pi); the L-shape occupies [0, 3 pi / 2].
double corner_angle(double x, double y) {
  double t = std::atan2(y, x);
  if (t < 0.0) t += 2.0 * kPi;
  return t;
}

struct Example1Fields {
  // Smooth factor S and the corner singularity Z = r^(2/3) sin(2 theta / 3);
  // the exact state/adjoint is S * Z. S vanishes on the outer boundary and
  // grad S vanishes at the corner, which keeps f = -Lap(SZ) + ... bounded.
  static double S(double x, double y) {
    return std::sin(0.5 * kPi * (x + 1.0)) * std::sin(0.5 * kPi * (y + 1.0));
  }
  static void gradS(double x, double y, double& gx, double& gy) {
    gx = 0.5 * kPi * std::cos(0.5 * kPi * (x + 1.0)) * std::sin(0.5 * kPi * (y + 1.0));
    gy = 0.5 * kPi * std::sin(0.5 * kPi * (x + 1.0)) * std::cos(0.5 * kPi * (y + 1.0));
  }
  static double Z(double x, double y) {
    const double r = std::hypot(x, y);
    if (r < 1e-300) return 0.0;
    return std::pow(r, 2.0 / 3.0) * std::sin(2.0 * corner_angle(x, y) / 3.0);
  }
  static void gradZ(double x, double y, double& gx, double& gy) {
    const double r = std::hypot(x, y);
    if (r < 1e-14) {  // gradient is singular at the corner itself
      gx = gy = 0.0;
      return;
    }
    const double t = corner_angle(x, y);
    const double c = 2.0 / 3.0 * std::pow(r, -1.0 / 3.0);
    const double st = std::sin(2.0 * t / 3.0), ct = std::cos(2.0 * t / 3.0);
    const double cos_t = x / r, sin_t = y / r;
    gx = c * (st * cos_t - ct * sin_t);
    gy = c * (st * sin_t + ct * cos_t);
  }
  static double value(double x, double y) { return S(x, y) * Z(x, y); }
  static void gradient(double x, double y, double& gx, double& gy) {
    double sx, sy, zx, zy;
    gradS(x, y, sx, sy);
    gradZ(x, y, zx, zy);
    const double s = S(x, y), z = Z(x, y);
    gx = sx * z + s * zx;
    gy = sy * z + s * zy;
  }
  // Z is harmonic away from the corner, so Lap(SZ) = Z Lap(S) + 2 grad S . grad Z
  // with Lap(S) = -(pi^2 / 2) S.
  static double laplacian(double x, double y) {
    double sx, sy, zx, zy;
    gradS(x, y, sx, sy);
    gradZ(x, y, zx, zy);
    return -0.5 * kPi * kPi * S(x, y) * Z(x, y) + 2.0 * (sx * zx + sy * zy);
  }
};

}  // namespace

ManufacturedCase example1(double nu) {
  if (!(nu > 0.0)) throw std::runtime_error("example1: nu must be positive");
  ManufacturedCase c;
  c.problem.nu = nu;
  c.problem.lower = -40.0;
  c.problem.upper = -0.1;
  c.problem.nonlinearity = Nonlinearity::arctan();

  const double lo = c.problem.lower, hi = c.problem.upper;
  auto value = [](const Point& q) { return Example1Fields::value(q[0], q[1]); };
  auto grad = [](const Point& q) {
    double gx, gy;
    Example1Fields::gradient(q[0], q[1], gx, gy);
    return Point{gx, gy, 0.0};
  };
  c.exact.y = value;
  c.exact.p = value;
  c.exact.grad_y = grad;
  c.exact.grad_p = grad;
  c.exact_u = [nu, lo, hi](const Point& q) {
    return project_box(-Example1Fields::value(q[0], q[1]) / nu, lo, hi);
  };
  c.laplacian_y = [](const Point& q) { return Example1Fields::laplacian(q[0], q[1]); };

  // f closes the state equation -Lap y + arctan(y) = u + f.
  c.problem.source = [nu, lo, hi](const Point& q) {
    const double v = Example1Fields::value(q[0], q[1]);
    const double u = project_box(-v / nu, lo, hi);
    return -Example1Fields::laplacian(q[0], q[1]) + std::atan(v) - u;
  };
  // y_omega closes the adjoint equation -Lap p + a_y(y) p = y - y_omega,
  // with p = y.
  c.problem.y_omega = [](const Point& q) {
    const double v = Example1Fields::value(q[0], q[1]);
    return v + Example1Fields::laplacian(q[0], q[1]) - v / (1.0 + v * v);
  };
  return c;
}

ControlProblem example2(const std::string& nonlinearity_tag) {
  if (nonlinearity_tag != "a1" && nonlinearity_tag != "a2" && nonlinearity_tag != "a3")
    throw std::runtime_error("example2: nonlinearity must be a1, a2, or a3");
  ControlProblem pb;
  pb.nu = 1e-3;
  pb.lower = -80.0;
  pb.upper = 100.0;
  pb.nonlinearity = Nonlinearity::by_name(nonlinearity_tag);
  pb.source = [](const Point&) { return 10.0; };
  pb.y_omega = [](const Point& q) {
    const double xi = 4.0 * (q[0] - 0.5) * (q[0] - 0.5) +
                      4.0 * (q[1] - 0.5) * (q[1] - 0.5) +
                      4.0 * (q[2] - 0.5) * (q[2] - 0.5) - 1.0;
    if (xi >= 0.0) return 0.0;
    return 100.0 * std::exp(1.0 / xi) * std::cos(4.0 * kPi * xi);
  };
  return pb;
}

double fit_rate(const std::vector<std::pair<long long, double>>& points) {
  if (points.size() < 3) throw std::runtime_error("fit_rate: needs at least 3 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [n, v] : points) {
    if (!(v > 0.0) || n <= 0)
      throw std::runtime_error("fit_rate: values and ndofs must be positive");
    const double lx = std::log(static_cast<double>(n));
    const double ly = std::log(v);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(points.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double slope_of(const std::vector<AdaptRecord>& recs, double AdaptRecord::*field,
                int window) {
  std::vector<std::pair<long long, double>> pts;
  const int start = std::max<int>(0, static_cast<int>(recs.size()) - window);
  for (std::size_t i = start; i < recs.size(); ++i)
    pts.emplace_back(recs[i].ndof, recs[i].*field);
  return fit_rate(pts);
}

RunResult run_experiment(const RunSpec& spec) {
  namespace fs = std::filesystem;

  ControlProblem pb;
  AdaptConfig cfg;
  std::unique_ptr<Mesh> initial;
  if (spec.example == 1) {
    ManufacturedCase c = example1(spec.nu);
    pb = std::move(c.problem);
    cfg.exact = std::move(c.exact);
    initial = std::make_unique<Mesh>(Mesh::lshape(0));
  } else if (spec.example == 2) {
    pb = example2(spec.nonlinearity);
    pb.nu = spec.nu;
    // Two uniform pre-refinements: a 12-iteration desk-scale budget starting
    // from the 6-tet Kuhn cube never leaves the startup regime.
    initial = std::make_unique<Mesh>(Mesh::cube(2));
  } else {
    throw std::runtime_error("run_experiment: example must be 1 or 2");
  }

  cfg.max_iters = spec.max_iters;
  cfg.estimator = spec.estimator;
  cfg.refinement = spec.refinement;
  cfg.cold_start = spec.cold_start;
  cfg.quad_assembly_override = spec.quad_assembly;

  const bool to_files = !spec.out_dir.empty();
  if (to_files) fs::create_directories(spec.out_dir);
  cfg.on_iteration = [&](const Mesh& m, const KktSolution& sol,
                         const IndicatorField& total, const AdaptRecord& rec) {
    if (to_files && spec.write_meshes) {
      std::vector<double> ind(total.values.data(), total.values.data() + total.values.size());
      std::vector<double> uvals(sol.u.values.data(), sol.u.values.data() + sol.u.values.size());
      std::vector<double> yvals(sol.y.values.data(), sol.y.values.data() + sol.y.values.size());
      std::vector<double> pvals(sol.p.values.data(), sol.p.values.data() + sol.p.values.size());
      std::ofstream vtk(fs::path(spec.out_dir) / ("mesh_" + std::to_string(rec.iteration) + ".vtk"));
      m.write_vtk(vtk, {{"indicator_sq", &ind}, {"u", &uvals}}, {{"y", &yvals}, {"p", &pvals}});
    }
    if (spec.on_iteration) spec.on_iteration(m, sol, total, rec);
  };

  AdaptResult res = adaptive_loop(pb, *initial, cfg);

  RunResult out;
  out.records = std::move(res.records);
  out.solution = std::move(res.solution);
  out.mesh = std::move(res.mesh);

  if (to_files) {
    std::ofstream csv(fs::path(spec.out_dir) / "records.csv");
    write_csv(csv, out.records);

    nlohmann::json summary;
    summary["example"] = spec.example;
    summary["nu"] = spec.nu;
    summary["nonlinearity"] = spec.example == 1 ? "arctan" : spec.nonlinearity;
    summary["estimator"] = spec.estimator == EstimatorKind::ours ? "ours" : "competitor";
    summary["refinement"] =
        spec.refinement == RefinementMode::adaptive ? "adaptive" : "uniform";
    summary["iterations"] = out.records.size();
    summary["seed"] = spec.seed;
    summary["final_ndof"] = out.records.back().ndof;
    summary["final_estimator_total"] = out.records.back().est_total;
    const int window = std::max<int>(3, static_cast<int>(out.records.size()) / 2);
    if (out.records.size() >= 3) {
      summary["slope_est_total"] = slope_of(out.records, &AdaptRecord::est_total, window);
      if (cfg.exact) {
        summary["slope_err_y_h1"] = slope_of(out.records, &AdaptRecord::err_y_h1, window);
        summary["slope_err_p_h1"] = slope_of(out.records, &AdaptRecord::err_p_h1, window);
        summary["slope_err_u_l2"] = slope_of(out.records, &AdaptRecord::err_u_l2, window);
        summary["final_effectivity"] = out.records.back().effectivity;
      }
    }
    std::ofstream js(fs::path(spec.out_dir) / "summary.json");
    js << summary.dump(2) << '\n';
  }
  return out;
}

}  // namespace ocpafem
