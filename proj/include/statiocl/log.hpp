#pragma once

#include <functional>
#include <string>

namespace statiocl {

using WarningSink = std::function<void(const std::string&)>;

/// Emits a warning through the installed sink (stderr by default).
void warn(const std::string& message);

/// Replaces the warning sink; returns the previous one. Passing an empty
/// function silences warnings.
WarningSink set_warning_sink(WarningSink sink);

}  // namespace statiocl
