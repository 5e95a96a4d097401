#pragma once

namespace memshare::cli {

// Exit codes: 0 success, 2 config error, 3 training fault, 4 checkpoint
// incompatibility.
int cli_main(int argc, const char* const* argv);

}  // namespace memshare::cli
