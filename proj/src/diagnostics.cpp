#include "gossipopt/diagnostics.hpp"

#include <iostream>
#include <mutex>

namespace gossipopt {

namespace {
std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}
WarningSink& sink_slot() {
  static WarningSink sink;
  return sink;
}
}  // namespace

void warn(const std::string& message) {
  std::lock_guard lock(sink_mutex());
  if (sink_slot()) {
    sink_slot()(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard lock(sink_mutex());
  WarningSink previous = std::move(sink_slot());
  sink_slot() = std::move(sink);
  return previous;
}

}  // namespace gossipopt
