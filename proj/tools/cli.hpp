#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hgapso::cli {

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hgapso::cli
