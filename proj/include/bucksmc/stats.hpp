#pragma once

#include <cmath>

namespace bucksmc {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;

inline double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865475244); }

} // namespace bucksmc
