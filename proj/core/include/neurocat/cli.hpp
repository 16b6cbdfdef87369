#pragma once

#include <iosfwd>

namespace neurocat {

// Exit codes: 0 ok, 1 validation failure, 2 runtime error, 64 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace neurocat
