#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace retroid::cli {

/// Runs one command line (without the program name). Returns 0 on success,
/// 1 on validation/usage errors, 2 on runtime failures.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

}  // namespace retroid::cli
