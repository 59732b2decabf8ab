#include "mixdown/util.hpp"

#include <charconv>
#include <cstdlib>

namespace mixdown {

namespace {

template <typename T>
std::string to_shortest(T v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::string fmt_float(float v) { return to_shortest(v); }
std::string fmt_double(double v) { return to_shortest(v); }

unsigned thread_cap() {
    const char* env = std::getenv("MIXDOWN_THREADS");
    if (!env) return 1;
    const unsigned long v = std::strtoul(env, nullptr, 10);
    return v == 0 ? 1u : static_cast<unsigned>(v);
}

}  // namespace mixdown
