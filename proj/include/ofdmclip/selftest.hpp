#pragma once

#include <ostream>

namespace ofdmclip {

/// Exhaustive-oracle and invariant checks; one line per check on `log`.
/// Returns the number of failed checks.
int run_selftest(std::ostream& log);

}  // namespace ofdmclip
