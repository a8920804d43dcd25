#ifndef OCPAFEM_ACCEPTANCE_HPP
#define OCPAFEM_ACCEPTANCE_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace ocpafem {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct AcceptanceOptions {
  int jobs = 2;             // worker threads for the independent runs
  bool include_slow = true; // criterion 8 (3D sweeps)
};

/// Runs the acceptance criteria, printing one pass/fail line per criterion
/// to `log`. Returns the per-criterion results.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts,
                                            std::ostream& log);

bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace ocpafem

#endif
