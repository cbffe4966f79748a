/// @file format.hpp
/// @brief Round-trip exact, locale-independent number formatting for CSV output.
#pragma once

#include <string>

namespace bsnq {

/// Shortest representation that parses back to the same double.
std::string fmt_double(double v);

}  // namespace bsnq
