#pragma once

#include <cstdint>

namespace ncollage {

/// IEEE 754 binary16 conversion, round to nearest even.
std::uint16_t float_to_half(float value);
float half_to_float(std::uint16_t bits);

/// Rounds a double through binary16.
inline double round_to_half(double v)
{
    return half_to_float(float_to_half(static_cast<float>(v)));
}

}  // namespace ncollage
