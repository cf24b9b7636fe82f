#pragma once

#include <string_view>

namespace stylemetric {

/// Writes a warning line to stderr unless STYLEMETRIC_QUIET is set.
void log_warning(std::string_view message);
void log_info(std::string_view message);

}  // namespace stylemetric
