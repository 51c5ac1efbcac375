#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ctpd::cli {

enum ExitCode { kOk = 0, kDataError = 1, kUsageError = 2 };

/// Parses argv and runs one subcommand. Data goes to `out` (or the --out
/// file), diagnostics to `err`.
int dispatch(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);
int dispatch(int argc, char **argv);

} // namespace ctpd::cli
