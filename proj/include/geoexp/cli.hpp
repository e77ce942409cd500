#pragma once

#include <iosfwd>

namespace geoexp {

/// Entry point of the `geoexp` tool. Returns 0 on success, 2 for usage
/// errors and 1 for runtime errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace geoexp
