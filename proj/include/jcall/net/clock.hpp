#pragma once

#include <cstdint>

namespace jcall {

// All scheduling is done in integer microseconds since run start. Virtual-clock
// runs advance this value exactly; real-clock runs map it onto steady_clock.
using Micros = std::int64_t;

constexpr Micros kMicrosPerMilli = 1'000;
constexpr Micros kMicrosPerSecond = 1'000'000;

constexpr Micros millis(std::int64_t ms) { return ms * kMicrosPerMilli; }
constexpr Micros seconds(std::int64_t s) { return s * kMicrosPerSecond; }

inline double to_seconds(Micros t) { return static_cast<double>(t) / 1e6; }
inline double to_millis(Micros t) { return static_cast<double>(t) / 1e3; }

enum class ClockMode { Virtual, Real };

}  // namespace jcall
