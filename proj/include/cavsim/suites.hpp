#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cavsim {

// Named verification suites behind `verify <suite>`: fast smoke versions of
// the property checks.  Returns true when the suite passes.
bool run_suite(const std::string& name, std::ostream& out);

std::vector<std::string> suite_names();

}  // namespace cavsim
