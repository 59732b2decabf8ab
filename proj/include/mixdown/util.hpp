#pragma once

#include <string>

namespace mixdown {

// Shortest round-trip decimal representation (std::to_chars), so text
// outputs are deterministic across runs.
std::string fmt_float(float v);
std::string fmt_double(double v);

// MIXDOWN_THREADS environment variable; 0 or unset means single-threaded.
unsigned thread_cap();

}  // namespace mixdown
