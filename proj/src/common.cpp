#include <cmath>
#include <limits>
#include <iostream>
#include <mutex>
#include <numbers>

#include "sdfo/error.hpp"
#include "sdfo/log.hpp"
#include "sdfo/rng.hpp"

namespace sdfo {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parameter: return "parameter error";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::empty_request: return "empty-request error";
    case ErrorKind::degenerate_split: return "degenerate-split error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::validation: return "validation error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::mode: return "mode error";
    case ErrorKind::training_diverged: return "training-diverged error";
    case ErrorKind::ill_conditioned: return "ill-conditioned error";
    case ErrorKind::degenerate_targets: return "degenerate-targets error";
    case ErrorKind::fit: return "fit error";
    case ErrorKind::degeneracy: return "degeneracy error";
    case ErrorKind::bounds_required: return "bounds-required error";
    case ErrorKind::evaluation: return "evaluation error";
    case ErrorKind::empty_eligible: return "empty-eligible error";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::division_by_zero: return "division-by-zero error";
    case ErrorKind::io: return "io error";
    case ErrorKind::internal: return "internal error";
  }
  return "error";
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r = engine_();
  while (r >= limit) r = engine_();
  return r % n;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace diag {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

Sink& current_sink() {
  static Sink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}

}  // namespace

Sink set_warning_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  Sink previous = std::move(current_sink());
  current_sink() = std::move(sink);
  return previous;
}

void warn(const std::string& msg) {
  std::lock_guard lock(sink_mutex());
  if (current_sink()) current_sink()(msg);
}

ScopedCapture::ScopedCapture(std::vector<std::string>& into)
    : previous_(set_warning_sink([&into](const std::string& msg) { into.push_back(msg); })) {}

ScopedCapture::~ScopedCapture() { set_warning_sink(std::move(previous_)); }

}  // namespace diag
}  // namespace sdfo
