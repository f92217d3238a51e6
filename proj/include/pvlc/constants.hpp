#ifndef PVLC_CONSTANTS_HPP
#define PVLC_CONSTANTS_HPP

namespace pvlc::constants {

// CODATA 2018 exact values.
inline constexpr double boltzmann = 1.380649e-23;        // J/K
inline constexpr double elementary_charge = 1.602176634e-19;  // C

inline constexpr double default_temperature_k = 300.0;

// BER below which FEC is assumed to deliver error-free output.
inline constexpr double fec_threshold = 2.0e-2;

}  // namespace pvlc::constants

#endif
