#pragma once

// Headless property suite behind `hisop selftest` and the acceptance test.

#include <string>
#include <vector>

namespace hisop {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;  // check held and finished within the time limit
  std::string detail;
  double seconds = 0.0;
  double limit_seconds = 0.0;
};

struct AcceptanceOptions {
  std::string data_dir;  // holds plane.scene, plane.cfg and bench.cfg
  std::string out_dir;   // scratch space for run artifacts and bench CSVs
  std::vector<int> only; // empty: every criterion
};

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options);

/// One line: "PASS  3 affine affinity invariance  0.12 s / 5 s  <detail>".
std::string format_result(const CriterionResult& result);

std::string default_data_dir();

}  // namespace hisop
