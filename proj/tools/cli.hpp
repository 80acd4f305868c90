#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tmm::cli {

/// Exit codes: 0 success, 1 usage or configuration error, 2 data/model inconsistency.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace tmm::cli
