#include "stylemetric/log.hpp"

#include <cstdlib>
#include <iostream>

namespace stylemetric {
namespace {
bool quiet() { return std::getenv("STYLEMETRIC_QUIET") != nullptr; }
}  // namespace

void log_warning(std::string_view message) {
  if (!quiet()) std::cerr << "[stylemetric] warning: " << message << '\n';
}

void log_info(std::string_view message) {
  if (!quiet()) std::cerr << "[stylemetric] " << message << '\n';
}

}  // namespace stylemetric
