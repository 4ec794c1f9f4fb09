#ifndef SEMLENS_TRAIN_SELFTEST_HPP
#define SEMLENS_TRAIN_SELFTEST_HPP

#include <ostream>

namespace semlens::train {

struct SelftestOptions {
  // test hook: perturb a softmax row before the row-sum check so the
  // negative control demonstrably fails
  bool corrupt_softmax = false;
};

// Runs the invariant suite, printing one PASS/FAIL line per check.
// Returns true iff every check passed.
bool run_selftest(std::ostream& os, const SelftestOptions& opt = {});

}  // namespace semlens::train

#endif
