#include "bsnq/format.hpp"

#include <charconv>

namespace bsnq {

std::string fmt_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, end);
}

}  // namespace bsnq
