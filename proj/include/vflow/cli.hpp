#pragma once

// Command-line front end: validate, compile, run and serve.
//
// Exit codes: 0 success, 1 validation/compile/run failure, 2 usage, 3 I/O.

#include <iosfwd>

namespace vflow {

int cli_main(int argc, const char* const* argv, std::istream& in, std::ostream& out,
             std::ostream& err);

}  // namespace vflow
