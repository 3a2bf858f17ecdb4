#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace adscreen::cli {

// Runs one `adscreen` invocation. `args` excludes the program name. Returns
// the process exit code: 0 on success, 2 for usage errors, 3 for data errors
// and 70 for internal invariant violations. Failures print one line of the
// form "error: <class>: <kind>: <message>" to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace adscreen::cli
