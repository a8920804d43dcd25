#include <CLI11.hpp>

#include <iostream>

#include "ocpafem/acceptance.hpp"
#include "ocpafem/bench.hpp"

namespace {

int cmd_run(const ocpafem::RunSpec& spec) {
  try {
    const ocpafem::RunResult res = ocpafem::run_experiment(spec);
    const auto& last = res.records.back();
    std::cout << "finished after " << res.records.size() << " iterations, Ndof "
              << last.ndof << ", estimator total " << last.est_total;
    if (spec.example == 1) std::cout << ", effectivity " << last.effectivity;
    std::cout << "\n";
    if (!spec.out_dir.empty())
      std::cout << "records.csv, summary.json and mesh_<iter>.vtk written to "
                << spec.out_dir << "\n";
    return 0;
  } catch (const ocpafem::NewtonFailure& e) {
    std::cerr << "solver non-convergence: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    const std::string what = e.what();
    std::cerr << "error: " << what << "\n";
    return what.find("no convergence") != std::string::npos ||
                   what.find("did not settle") != std::string::npos
               ? 2
               : 1;
  }
}

int cmd_verify(int jobs, bool skip_slow) {
  ocpafem::AcceptanceOptions opts;
  opts.jobs = jobs;
  opts.include_slow = !skip_slow;
  const auto results = ocpafem::run_acceptance(opts, std::cout);
  return ocpafem::all_passed(results) ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive FEM for control-constrained semilinear elliptic optimal control"};
  app.require_subcommand(1);

  ocpafem::RunSpec spec;
  spec.max_iters = 10;
  std::string estimator = "ours";
  std::string refinement = "adaptive";
  std::string nonlinearity = "arctan";

  CLI::App* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("--example", spec.example, "Benchmark: 1 (L-shape) or 2 (cube)")
      ->check(CLI::IsMember({1, 2}))
      ->required();
  run->add_option("--nu", spec.nu, "Control regularization weight");
  run->add_option("--nonlinearity", nonlinearity, "arctan | a1 | a2 | a3");
  run->add_option("--estimator", estimator, "ours | competitor")
      ->check(CLI::IsMember({"ours", "competitor"}));
  run->add_option("--refinement", refinement, "adaptive | uniform")
      ->check(CLI::IsMember({"adaptive", "uniform"}));
  run->add_option("--max-iters", spec.max_iters, "Adaptive loop iterations")
      ->check(CLI::PositiveNumber);
  run->add_option("--out", spec.out_dir, "Output directory for records/meshes/summary");
  run->add_flag("--cold-start", spec.cold_start,
                "Re-zero the solver guess on every mesh instead of warm-starting");
  run->add_option("--quad-assembly", spec.quad_assembly,
                  "Override the assembly quadrature degree");
  run->add_option("--seed", spec.seed, "Recorded in summary.json (runs are deterministic)");

  int jobs = 2;
  bool skip_slow = false;
  CLI::App* verify = app.add_subcommand("verify", "Run the acceptance suite");
  verify->add_option("--jobs", jobs, "Worker threads for independent runs")
      ->check(CLI::PositiveNumber);
  verify->add_flag("--skip-slow", skip_slow, "Skip the 3D sweeps (criterion 8)");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    spec.nonlinearity = nonlinearity;
    spec.estimator = estimator == "ours" ? ocpafem::EstimatorKind::ours
                                         : ocpafem::EstimatorKind::competitor;
    spec.refinement = refinement == "adaptive" ? ocpafem::RefinementMode::adaptive
                                               : ocpafem::RefinementMode::uniform;
    return cmd_run(spec);
  }
  return cmd_verify(jobs, skip_slow);
}
