#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace aad {

// Exit codes: 0 success, 1 internal failure, 2 configuration, 3 I/O,
// 4 data, 5 numerical. Failures print "error[<category>]: <message>" on err.
enum ExitCode : int { kExitOk = 0, kExitInternal = 1, kExitConfig = 2, kExitIo = 3, kExitData = 4, kExitNumerical = 5 };

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace aad
