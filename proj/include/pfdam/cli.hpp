#pragma once

namespace pfdam {

/// Command-line driver, argv as in main.  Returns the process exit code:
/// 0 success, 1 usage or configuration error, 2 numerical failure,
/// 3 verification failure.
int cli_main(int argc, const char* const* argv);

}  // namespace pfdam
