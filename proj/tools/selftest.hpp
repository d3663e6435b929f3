#pragma once

#include <vector>

#include "robreg/harness.hpp"

namespace robreg::tools {

// Fast versions of the worked examples for every module.
std::vector<CheckResult> run_selftest();

}  // namespace robreg::tools
