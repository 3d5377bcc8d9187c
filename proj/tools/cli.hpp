#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace msl {

/// Entry point of the experiment driver. Returns the process exit code:
/// 0 success, 1 divergence or I/O failure, 2 configuration error.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace msl
