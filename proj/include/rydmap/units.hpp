#pragma once

// Physical constants and unit conversions. Internal units are eV, um, K, us.

namespace rydmap::units {

inline constexpr double hbar_ev_s = 6.582119569e-16;
inline constexpr double k_boltzmann_ev_per_k = 8.617333262e-5;

inline constexpr double um6_per_m6 = 1e36;
inline constexpr double s_per_us = 1e-6;

/// Converts an angular-frequency C6 (rad m^6 / s) into eV um^6.
constexpr double c6_to_ev_um6(double c6_rad_m6_per_s) {
    return c6_rad_m6_per_s * hbar_ev_s * um6_per_m6;
}

constexpr double ev_to_rad_per_s(double energy_ev) { return energy_ev / hbar_ev_s; }
constexpr double rad_per_s_to_ev(double omega) { return omega * hbar_ev_s; }

constexpr double thermal_energy_ev(double temperature_k) {
    return k_boltzmann_ev_per_k * temperature_k;
}

}  // namespace rydmap::units
