#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rydmap/lattice.hpp"

namespace rydmap {

enum class WaveformKind { rabi, detuning, phase };

struct Knot {
    double t_us = 0.0;
    double value = 0.0;
};

/// Piecewise-linear waveform. Values are rad/s (rabi), eV (detuning) or rad (phase).
struct Waveform {
    WaveformKind kind = WaveformKind::rabi;
    std::vector<Knot> knots;

    /// Linear interpolation; clamps outside the knot range.
    double at(double t_us) const;
    double duration_us() const { return knots.empty() ? 0.0 : knots.back().t_us; }
};

struct Schedule {
    Waveform rabi{WaveformKind::rabi, {}};
    Waveform detuning{WaveformKind::detuning, {}};
    Waveform phase{WaveformKind::phase, {}};
    double total_time_us = 0.0;
};

struct ScheduleParams {
    double detuning_final_ev = 0.0;
    double detuning_initial_ev = -8.227649e-8;
    double total_time_us = 4.0;
    double hold_fraction = 0.0625;
    /// Placeholder drive amplitude; override for a real device.
    double rabi_peak_rad_s = 1.58e7;
};

/// Holds at the initial detuning for hold_fraction * T, ramps linearly, holds
/// at the final detuning. The Rabi drive rises during the first hold, stays
/// flat over the ramp and falls during the last hold (a triangle when the
/// hold fraction is 0). Phase is 0 throughout.
Schedule build_schedule(const ScheduleParams& params);

/// Detuning ramp rate (eV/us) over the central segment.
double ramp_rate_ev_per_us(const ScheduleParams& params);

/// Codes: knot_order, total_time, detuning_range, rabi_negative, rabi_endpoints, phase_nonzero.
ValidationReport validate_schedule(const Schedule& schedule, const HardwareSpec& spec);

/// Device program: atom coordinates (um) and waveforms in SI units (s, rad/s, rad).
/// Throws std::invalid_argument when the layout or schedule fails validation.
nlohmann::json export_program(const Layout& layout, const Schedule& schedule, const HardwareSpec& spec);

struct Program {
    std::vector<Vec2> atoms_um;
    Schedule schedule;
};

Program import_program(const nlohmann::json& doc);

/// Header `t_us,rabi_rad_s,detuning_ev,phase_rad`, `points` evenly spaced samples.
void write_schedule_csv(std::ostream& out, const Schedule& schedule, std::size_t points = 1000);

}  // namespace rydmap
