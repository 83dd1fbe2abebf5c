#pragma once

namespace sdsrl::cli {

// Entry point behind the sdsrl binary. Returns the process exit code:
// 0 on success, 2 on a usage error, 1 on any stage failure.
int run(int argc, const char* const* argv);

}  // namespace sdsrl::cli
