#pragma once

namespace levyband::cli {

/// Exit codes: 0 success, 1 solver non-convergence / verification or
/// cross-check failure, 2 usage or configuration error.
int run(int argc, char** argv);

}  // namespace levyband::cli
