#include "rydmap/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rydmap/text_io.hpp"
#include "rydmap/units.hpp"

namespace rydmap {

double Waveform::at(double t_us) const {
    if (knots.empty()) return 0.0;
    if (t_us <= knots.front().t_us) return knots.front().value;
    if (t_us >= knots.back().t_us) return knots.back().value;
    const auto it = std::upper_bound(knots.begin(), knots.end(), t_us,
                                     [](double t, const Knot& k) { return t < k.t_us; });
    const Knot& b = *it;
    const Knot& a = *(it - 1);
    const double f = (t_us - a.t_us) / (b.t_us - a.t_us);
    return a.value + f * (b.value - a.value);
}

namespace {

void check_params(const ScheduleParams& p) {
    if (!(p.total_time_us > 0.0)) throw std::invalid_argument("total time must be positive");
    if (!(p.hold_fraction >= 0.0) || !(2.0 * p.hold_fraction < 1.0)) {
        throw std::invalid_argument("hold fraction must satisfy 0 <= 2 * hold_fraction < 1");
    }
}

}  // namespace

Schedule build_schedule(const ScheduleParams& p) {
    check_params(p);
    const double total = p.total_time_us;
    Schedule s;
    s.total_time_us = total;
    if (p.hold_fraction == 0.0) {
        s.detuning.knots = {{0.0, p.detuning_initial_ev}, {total, p.detuning_final_ev}};
        s.rabi.knots = {{0.0, 0.0}, {0.5 * total, p.rabi_peak_rad_s}, {total, 0.0}};
    } else {
        const double t1 = p.hold_fraction * total;
        const double t2 = (1.0 - p.hold_fraction) * total;
        s.detuning.knots = {{0.0, p.detuning_initial_ev},
                            {t1, p.detuning_initial_ev},
                            {t2, p.detuning_final_ev},
                            {total, p.detuning_final_ev}};
        s.rabi.knots = {{0.0, 0.0}, {t1, p.rabi_peak_rad_s}, {t2, p.rabi_peak_rad_s}, {total, 0.0}};
    }
    s.phase.knots = {{0.0, 0.0}, {total, 0.0}};
    return s;
}

double ramp_rate_ev_per_us(const ScheduleParams& p) {
    check_params(p);
    return (p.detuning_final_ev - p.detuning_initial_ev) / ((1.0 - 2.0 * p.hold_fraction) * p.total_time_us);
}

ValidationReport validate_schedule(const Schedule& schedule, const HardwareSpec& spec) {
    ValidationReport report;
    auto add = [&](std::string code, std::string message) { report.violations.push_back({std::move(code), std::move(message)}); };
    for (const Waveform* w : {&schedule.rabi, &schedule.detuning, &schedule.phase}) {
        const char* name = w->kind == WaveformKind::rabi ? "rabi" : w->kind == WaveformKind::detuning ? "detuning" : "phase";
        if (w->knots.size() < 2) {
            add("knot_order", std::string(name) + " waveform needs at least two knots");
            continue;
        }
        if (w->knots.front().t_us != 0.0) add("knot_order", std::string(name) + " waveform must start at t = 0");
        for (std::size_t k = 1; k < w->knots.size(); ++k) {
            if (!(w->knots[k].t_us > w->knots[k - 1].t_us)) {
                add("knot_order", std::string(name) + " knot times must increase strictly");
                break;
            }
        }
        if (w->knots.back().t_us != schedule.total_time_us) {
            add("total_time", std::string(name) + " waveform ends at " + text::format_double(w->knots.back().t_us) +
                                  " us, total time is " + text::format_double(schedule.total_time_us) + " us");
        }
    }
    const double limit = spec.detuning_max_ev;
    for (const auto& k : schedule.detuning.knots) {
        if (k.value > limit) {
            add("detuning_range", "detuning above " + text::format_double(limit) + " eV at t = " +
                                      text::format_double(k.t_us) + " us (" + text::format_double(k.value) + " eV)");
        } else if (k.value < -limit) {
            add("detuning_range", "detuning below -" + text::format_double(limit) + " eV at t = " +
                                      text::format_double(k.t_us) + " us (" + text::format_double(k.value) + " eV)");
        }
    }
    for (const auto& k : schedule.rabi.knots) {
        if (k.value < 0.0) add("rabi_negative", "negative rabi amplitude at t = " + text::format_double(k.t_us) + " us");
    }
    if (!schedule.rabi.knots.empty() && (schedule.rabi.knots.front().value != 0.0 || schedule.rabi.knots.back().value != 0.0)) {
        add("rabi_endpoints", "rabi amplitude must be 0 at both ends");
    }
    for (const auto& k : schedule.phase.knots) {
        if (k.value != 0.0) {
            add("phase_nonzero", "phase must stay 0 (t = " + text::format_double(k.t_us) + " us)");
            break;
        }
    }
    return report;
}

namespace {

nlohmann::json waveform_json(const Waveform& w, const char* unit, double scale) {
    std::vector<double> times;
    std::vector<double> values;
    for (const auto& k : w.knots) {
        times.push_back(k.t_us * units::s_per_us);
        values.push_back(k.value * scale);
    }
    return {{"unit", unit}, {"times_s", times}, {"values", values}};
}

Waveform waveform_from_json(const nlohmann::json& j, WaveformKind kind, double scale) {
    const auto times = j.at("times_s").get<std::vector<double>>();
    const auto values = j.at("values").get<std::vector<double>>();
    if (times.size() != values.size()) throw std::invalid_argument("waveform times and values differ in length");
    Waveform w{kind, {}};
    for (std::size_t k = 0; k < times.size(); ++k) w.knots.push_back({times[k] / units::s_per_us, values[k] * scale});
    return w;
}

std::string describe(const ValidationReport& report) {
    std::string out;
    for (const auto& v : report.violations) out += (out.empty() ? "" : "; ") + v.message;
    return out;
}

}  // namespace

nlohmann::json export_program(const Layout& layout, const Schedule& schedule, const HardwareSpec& spec) {
    const auto layout_report = validate_layout(layout, spec);
    if (!layout_report.valid()) throw std::invalid_argument("invalid layout: " + describe(layout_report));
    const auto schedule_report = validate_schedule(schedule, spec);
    if (!schedule_report.valid()) throw std::invalid_argument("invalid schedule: " + describe(schedule_report));
    std::vector<std::array<double, 2>> atoms(layout.positions_um.begin(), layout.positions_um.end());
    return {{"atoms_um", atoms},
            {"total_time_s", schedule.total_time_us * units::s_per_us},
            {"waveforms",
             {{"rabi", waveform_json(schedule.rabi, "rad/s", 1.0)},
              {"detuning", waveform_json(schedule.detuning, "rad/s", 1.0 / units::hbar_ev_s)},
              {"phase", waveform_json(schedule.phase, "rad", 1.0)}}}};
}

Program import_program(const nlohmann::json& doc) {
    Program p;
    for (const auto& a : doc.at("atoms_um")) p.atoms_um.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
    const auto& w = doc.at("waveforms");
    p.schedule.total_time_us = doc.at("total_time_s").get<double>() / units::s_per_us;
    p.schedule.rabi = waveform_from_json(w.at("rabi"), WaveformKind::rabi, 1.0);
    p.schedule.detuning = waveform_from_json(w.at("detuning"), WaveformKind::detuning, units::hbar_ev_s);
    p.schedule.phase = waveform_from_json(w.at("phase"), WaveformKind::phase, 1.0);
    return p;
}

void write_schedule_csv(std::ostream& out, const Schedule& schedule, std::size_t points) {
    if (points < 2) throw std::invalid_argument("schedule CSV needs at least 2 points");
    out << "t_us,rabi_rad_s,detuning_ev,phase_rad\n";
    for (std::size_t i = 0; i < points; ++i) {
        const double t = i + 1 == points ? schedule.total_time_us
                                         : schedule.total_time_us * static_cast<double>(i) / static_cast<double>(points - 1);
        out << text::format_double(t) << ',' << text::format_double(schedule.rabi.at(t)) << ','
            << text::format_double(schedule.detuning.at(t)) << ',' << text::format_double(schedule.phase.at(t)) << '\n';
    }
}

}  // namespace rydmap
