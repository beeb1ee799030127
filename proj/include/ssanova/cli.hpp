#pragma once

#include <string>
#include <vector>

namespace ssanova {

/// Command-line front end.  Exit codes: 0 success, 1 input error (single-line
/// diagnostic naming the offending key or path), 2 numerical degeneracy.
int dispatch(const std::vector<std::string>& args);
int dispatch(int argc, const char* const* argv);

} // namespace ssanova
