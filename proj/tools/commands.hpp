#ifndef ARML_TOOLS_COMMANDS_HPP
#define ARML_TOOLS_COMMANDS_HPP

#include <iosfwd>

namespace arml::cli {

/// Runs the `arml` command line. Returns 0 on success, 1 on a runtime failure and
/// 2 on a usage error; messages go to `err`, stdout-bound results to `out`.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

}  // namespace arml::cli

#endif  // ARML_TOOLS_COMMANDS_HPP
