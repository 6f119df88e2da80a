#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gpl::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntimeAbort = 2 };

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "GPL_OUTPUT_ROOT";

/// "<version> (<git revision>)".
std::string version_stamp();

/// Entry point shared by the `gpl` binary and the tests. `args` excludes the
/// program name. Reports go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gpl::cli
