#pragma once

#include <iosfwd>
#include <string>

namespace oupinball::cli {

enum ExitCode : int {
    ok = 0,
    other_failure = 1,
    input_error = 2,
    disconnected = 3,
    mc_failure = 4,
    special_function_failure = 5,
};

/// Entry point of the `oupinball` executable. Machine-readable results go to `out`,
/// diagnostics to `err`; the return value is the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// JSON Schema (draft 2020-12) of the experiment config.
std::string schema();

}  // namespace oupinball::cli
