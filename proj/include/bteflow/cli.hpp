#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace bteflow {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitInvalid = 1, kExitRuntime = 2 };

/// Commands: run, check, dump, normalize, gen-table. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bteflow
