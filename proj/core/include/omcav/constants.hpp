#ifndef OMCAV_CONSTANTS_HPP
#define OMCAV_CONSTANTS_HPP

namespace omcav {

// Physical constants (SI).
inline constexpr double kHbar = 1.054571817e-34;      // J s
inline constexpr double kEps0 = 8.8541878128e-12;     // F / m
inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

// File interfaces carry ordinary frequency in Hz; everything internal is
// angular (rad/s). Conversions happen exactly once, at the boundary.
inline constexpr double hz_to_rad(double f_hz) { return kTwoPi * f_hz; }
inline constexpr double rad_to_hz(double w) { return w / kTwoPi; }

// dBm <-> watts, and plain dB ratios.
inline double dbm_to_watt(double dbm);
inline double watt_to_dbm(double watt);
inline double db_to_power_ratio(double db);

}  // namespace omcav

#include <cmath>

namespace omcav {

inline double dbm_to_watt(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
inline double watt_to_dbm(double watt) { return 10.0 * std::log10(watt / 1e-3); }
inline double db_to_power_ratio(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace omcav

#endif  // OMCAV_CONSTANTS_HPP
