#pragma once

#include <functional>
#include <string>

namespace gossipopt {

/// Process-wide warning channel. Defaults to stderr; tests may capture it.
using WarningSink = std::function<void(const std::string&)>;

void warn(const std::string& message);
/// Installs a sink and returns the previous one. Passing an empty function restores stderr.
WarningSink set_warning_sink(WarningSink sink);

}  // namespace gossipopt
