#pragma once

#include <functional>
#include <string>

namespace lapmesh {

using WarningHandler = std::function<void(const std::string&)>;

/// Replaces the process-wide warning sink (default: stderr). Returns the
/// previous handler so callers can restore it.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(const std::string& message);

}  // namespace lapmesh
