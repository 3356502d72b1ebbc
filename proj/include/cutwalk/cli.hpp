#pragma once

#include <string>
#include <vector>

namespace cutwalk::cli {

// Full command-line entry (parse + dispatch + artifact writing).  Returns the
// process exit code: 0 ok, 2 config error, 3 model error, 4 numeric cap,
// 10 unexpected.  Exposed as a library call so tests can drive it in-process.
int run(const std::vector<std::string>& args);

}  // namespace cutwalk::cli
