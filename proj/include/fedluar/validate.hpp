#pragma once

#include <ostream>

namespace fedluar {

// Fast self-check battery behind the `validate` subcommand: probability
// simplex properties, a hand-computed selection case, sampling frequencies,
// a finite-difference gradient check, accounting conservation, recycling
// byte-identity, and run determinism. Prints one line per check; returns the
// number of failures.
int run_validation_suite(std::ostream& out);

}  // namespace fedluar
