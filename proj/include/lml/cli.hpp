#pragma once

namespace lml {

// Entry point of the `lml` tool. Returns the process exit status:
// 0 on success, 2 on usage or configuration errors, 1 on any other failure.
int run_cli(int argc, const char* const* argv);

}  // namespace lml
