#include "fairlens/common.hpp"

#include <cstdio>
#include <cstdlib>

namespace fairlens {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s, bool* ok) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    bool good = end != begin && *end == '\0' && !s.empty();
    if (ok) *ok = good;
    return v;
}

}  // namespace fairlens
