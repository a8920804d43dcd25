#ifndef OCPAFEM_BENCH_HPP
#define OCPAFEM_BENCH_HPP

#include <string>
#include <utility>
#include <vector>

#include "ocpafem/adapt.hpp"

namespace ocpafem {

/// Problem data reverse-engineered from a registered exact optimal pair, so
/// that true errors are computable along a run.
struct ManufacturedCase {
  ControlProblem problem;
  ExactSolution exact;
  ScalarField exact_u;        // Pi_[a,b](-p/nu)
  ScalarField laplacian_y;    // analytic, for build-time validation
};

/// L-shaped-domain benchmark: arctan nonlinearity, bounds [-40, -0.1],
/// exact state = adjoint = sin((pi/2)(x+1)) sin((pi/2)(y+1)) r^(2/3) sin(2 theta/3)
/// in polar coordinates about the reentrant corner; f and y_omega close the
/// optimality system.
ManufacturedCase example1(double nu);

/// Unit-cube benchmark: f = 10, bounds [-80, 100], nu = 1e-3, desired state
/// a compactly supported radial bump; no exact solution (estimator-only).
/// Tag selects the nonlinearity: a1 | a2 | a3.
ControlProblem example2(const std::string& nonlinearity_tag);

/// Least-squares slope of log(value) against log(ndof). Requires at least
/// 3 points and positive values.
double fit_rate(const std::vector<std::pair<long long, double>>& points);

/// Experiment runner shared by the CLI and the acceptance suite.
struct RunSpec {
  int example = 1;
  double nu = 1e-3;
  std::string nonlinearity = "arctan";  // example 2: a1 | a2 | a3
  EstimatorKind estimator = EstimatorKind::ours;
  RefinementMode refinement = RefinementMode::adaptive;
  int max_iters = 10;
  bool cold_start = false;
  int quad_assembly = -1;
  unsigned seed = 0;          // recorded in the summary; runs are deterministic
  std::string out_dir;        // empty: no files written
  bool write_meshes = true;   // mesh_<iter>.vtk dumps when out_dir is set
  /// Extra per-iteration hook (runs after the internal bookkeeping).
  std::function<void(const Mesh&, const KktSolution&, const IndicatorField&,
                     const AdaptRecord&)>
      on_iteration;
};

struct RunResult {
  std::vector<AdaptRecord> records;
  KktSolution solution;
  std::unique_ptr<Mesh> mesh;
};

RunResult run_experiment(const RunSpec& spec);

/// Slopes fitted over the trailing `window` records of a run.
double slope_of(const std::vector<AdaptRecord>& recs, double AdaptRecord::*field,
                int window);

}  // namespace ocpafem

#endif
