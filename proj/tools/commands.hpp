#pragma once

namespace calibr::cli {

// Parses argv and executes the selected subcommand.
// Exit status: 0 success, 1 validation/usage error, 2 runtime failure.
int run(int argc, char** argv);

}  // namespace calibr::cli
