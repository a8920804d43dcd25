#ifndef OCPAFEM_ADAPT_HPP
#define OCPAFEM_ADAPT_HPP

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "ocpafem/estimator.hpp"

namespace ocpafem {

/// Registered exact optimal pair for error reporting; the exact control is
/// derived from p via the projection formula.
struct ExactSolution {
  ScalarField y;
  VectorField grad_y;
  ScalarField p;
  VectorField grad_p;
};

/// One row of the per-iteration record stream.
struct AdaptRecord {
  int iteration = 0;   // 1-based
  long long ndof = 0;  // 2 dim(P1_0) + dim(P0)
  double est_st = 0.0;
  double est_ad = 0.0;
  double est_ct = 0.0;
  double est_total = 0.0;
  double err_y_h1 = 0.0;   // nan when no exact solution is registered
  double err_p_h1 = 0.0;
  double err_u_l2 = 0.0;
  double err_total = 0.0;
  double effectivity = 0.0;
  double seconds = 0.0;
};

/// Estimator/error ratio with the degenerate conventions: 1 when both
/// vanish (converged), +infinity when only the error vanishes.
double effectivity(double est_total, double err_total);

/// Maximum marking: elements with squared indicator strictly above half of
/// the maximum squared indicator. An all-zero field marks nothing (the
/// loop treats that as converged).
std::vector<int> mark_max(const IndicatorField& indicators);

enum class EstimatorKind { ours, competitor };
enum class RefinementMode { adaptive, uniform };

struct AdaptConfig {
  int max_iters = 10;
  EstimatorKind estimator = EstimatorKind::ours;
  RefinementMode refinement = RefinementMode::adaptive;
  std::optional<ExactSolution> exact;
  bool cold_start = false;       // re-zero the initial guess on every mesh
  int quad_assembly_override = -1;
  /// Optional per-iteration hook (estimand studies, VTK dumps, ...).
  std::function<void(const Mesh&, const KktSolution&, const IndicatorField& total,
                     const AdaptRecord&)>
      on_iteration;
};

struct AdaptResult {
  std::vector<AdaptRecord> records;
  KktSolution solution;         // on the final mesh
  std::unique_ptr<Mesh> mesh;   // final mesh (stable address)
};

/// Algorithm: per iteration solve the discrete optimality system
/// (warm-started unless cold_start), evaluate the configured estimator,
/// record, then mark (maximum strategy) and bisect. Stops at max_iters or
/// when the estimator total falls below 1e-12.
AdaptResult adaptive_loop(const ControlProblem& pb, const Mesh& initial,
                          const AdaptConfig& config);

void write_csv(std::ostream& os, const std::vector<AdaptRecord>& records);
std::vector<AdaptRecord> read_csv(std::istream& is);

}  // namespace ocpafem

#endif
