#pragma once

#include <ostream>

namespace tfln {

/// Entry point behind the `tfln` binary. Results go to `out`, diagnostics to
/// `err`. Returns 0 on success, 1 on validation/usage errors, 2 on runtime
/// errors.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tfln
