#pragma once

#include <functional>
#include <string>
#include <vector>

namespace sdfo::diag {

using Sink = std::function<void(const std::string&)>;

// Default sink writes "warning: <msg>" to stderr. Returns the previous sink.
Sink set_warning_sink(Sink sink);
void warn(const std::string& msg);

/// Captures warnings for the lifetime of the object (tests, report assembly).
class ScopedCapture {
 public:
  explicit ScopedCapture(std::vector<std::string>& into);
  ~ScopedCapture();
  ScopedCapture(const ScopedCapture&) = delete;
  ScopedCapture& operator=(const ScopedCapture&) = delete;

 private:
  Sink previous_;
};

}  // namespace sdfo::diag
