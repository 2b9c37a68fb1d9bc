#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace og::cli {

// Runs one command (args exclude the program name) and returns the process
// exit code: 0 ok, 2 usage, 3 I/O, 4 dimension mismatch, 5 invariant
// violation. All output goes through the given streams so tests can drive the
// CLI in-process.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace og::cli
