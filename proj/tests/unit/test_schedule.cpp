#include <doctest.h>

#include <algorithm>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "rydmap/schedule.hpp"

using namespace rydmap;

namespace {

constexpr double kMax = 8.227649e-8;

}  // namespace

TEST_CASE("default schedule shape") {
    const auto s = build_schedule({});
    CHECK(s.total_time_us == 4.0);
    REQUIRE(s.detuning.knots.size() == 4);
    CHECK(s.detuning.knots[1].t_us == 0.25);
    CHECK(s.detuning.knots[2].t_us == 3.75);
    CHECK(s.detuning.knots[0].value == -kMax);
    CHECK(s.detuning.knots[1].value == -kMax);
    CHECK(s.detuning.knots[3].value == 0.0);
    CHECK(s.rabi.at(0.0) == 0.0);
    CHECK(s.rabi.at(4.0) == 0.0);
    CHECK(s.rabi.at(2.0) == 1.58e7);
    for (double t : {0.0, 1.0, 2.5, 4.0}) CHECK(s.phase.at(t) == 0.0);
    CHECK(s.detuning.at(2.0) == doctest::Approx(-kMax * (1.75 / 3.5)));
    CHECK(s.detuning.at(-1.0) == -kMax);
    CHECK(s.detuning.at(9.0) == 0.0);
    CHECK(validate_schedule(s, HardwareSpec{}).valid());
}

TEST_CASE("ramp rates") {
    ScheduleParams p;
    p.detuning_final_ev = kMax;
    CHECK(ramp_rate_ev_per_us(p) == doctest::Approx(4.70e-8).epsilon(1e-3));
    p.detuning_final_ev = p.detuning_initial_ev;
    CHECK(ramp_rate_ev_per_us(p) == 0.0);
}

TEST_CASE("parameter errors") {
    ScheduleParams p;
    p.hold_fraction = 0.5;
    CHECK_THROWS_WITH(build_schedule(p), "hold fraction must satisfy 0 <= 2 * hold_fraction < 1");
    p.hold_fraction = -0.1;
    CHECK_THROWS(build_schedule(p));
    p = {};
    p.total_time_us = 0.0;
    CHECK_THROWS_WITH(build_schedule(p), "total time must be positive");
}

TEST_CASE("zero hold gives a triangular drive") {
    ScheduleParams p;
    p.hold_fraction = 0.0;
    const auto s = build_schedule(p);
    CHECK(s.detuning.knots.size() == 2);
    CHECK(s.rabi.knots.size() == 3);
    CHECK(s.rabi.at(2.0) == 1.58e7);
    CHECK(s.rabi.at(1.0) == doctest::Approx(0.79e7));
    CHECK(validate_schedule(s, HardwareSpec{}).valid());
}

TEST_CASE("validator") {
    const HardwareSpec spec;
    ScheduleParams p;
    p.detuning_final_ev = 9e-8;
    auto report = validate_schedule(build_schedule(p), spec);
    CHECK(report.has("detuning_range"));
    CHECK(report.violations.front().message.find("detuning above 8.227649e-08 eV at t = 3.75") != std::string::npos);
    p.detuning_final_ev = kMax;
    CHECK(validate_schedule(build_schedule(p), spec).valid());
    p.detuning_initial_ev = -9e-8;
    CHECK(validate_schedule(build_schedule(p), spec).has("detuning_range"));

    auto s = build_schedule({});
    s.rabi.knots[1].value = -1.0;
    CHECK(validate_schedule(s, spec).has("rabi_negative"));
    s = build_schedule({});
    s.rabi.knots.back().value = 5.0;
    CHECK(validate_schedule(s, spec).has("rabi_endpoints"));
    s = build_schedule({});
    s.phase.knots[1].value = 0.1;
    CHECK(validate_schedule(s, spec).has("phase_nonzero"));
    s = build_schedule({});
    std::swap(s.detuning.knots[1], s.detuning.knots[2]);
    CHECK(validate_schedule(s, spec).has("knot_order"));
    s = build_schedule({});
    s.total_time_us = 5.0;
    CHECK(validate_schedule(s, spec).has("total_time"));
}

TEST_CASE("program export and import") {
    const HardwareSpec spec;
    const auto layout = scale_to_hardware(build_flake("hexagon"), 4.0);
    ScheduleParams p;
    p.detuning_initial_ev = -8.2276e-8;
    const auto s = build_schedule(p);
    const auto doc = export_program(layout, s, spec);
    CHECK(doc.at("total_time_s").get<double>() == doctest::Approx(4e-6));
    CHECK(doc.at("atoms_um").size() == 6);
    const auto det = doc.at("waveforms").at("detuning").at("values").get<std::vector<double>>();
    CHECK(det.front() == doctest::Approx(-1.25e8).epsilon(1e-3));
    const auto back = import_program(doc);
    CHECK(back.atoms_um.size() == 6);
    CHECK(back.schedule.total_time_us == doctest::Approx(4.0));
    REQUIRE(back.schedule.detuning.knots.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(back.schedule.detuning.knots[k].value == doctest::Approx(s.detuning.knots[k].value).epsilon(1e-12));
        CHECK(back.schedule.detuning.knots[k].t_us == doctest::Approx(s.detuning.knots[k].t_us).epsilon(1e-12));
    }

    Layout empty;
    CHECK_THROWS_WITH_AS(export_program(empty, s, spec), doctest::Contains("invalid layout"), std::invalid_argument);
    const auto close = scale_to_hardware(build_flake("hexagon"), 3.9);
    CHECK_THROWS_WITH(export_program(close, s, spec), doctest::Contains("min atom distance"));
    ScheduleParams hot;
    hot.detuning_final_ev = 1e-7;
    CHECK_THROWS_WITH(export_program(layout, build_schedule(hot), spec), doctest::Contains("invalid schedule"));
}

TEST_CASE("final detuning changes only the detuning waveform") {
    const auto base = build_schedule({});
    for (int i = 0; i < 10; ++i) {
        ScheduleParams p;
        p.detuning_final_ev = -kMax + 2.0 * kMax * i / 9.0;
        const auto s = build_schedule(p);
        REQUIRE(s.rabi.knots.size() == base.rabi.knots.size());
        for (std::size_t k = 0; k < s.rabi.knots.size(); ++k) {
            CHECK(s.rabi.knots[k].t_us == base.rabi.knots[k].t_us);
            CHECK(s.rabi.knots[k].value == base.rabi.knots[k].value);
        }
        CHECK(s.phase.knots.size() == base.phase.knots.size());
        CHECK(s.detuning.knots.back().value == p.detuning_final_ev);
    }
}

TEST_CASE("schedule CSV") {
    std::ostringstream out;
    write_schedule_csv(out, build_schedule({}));
    const auto text = out.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 1001);
    CHECK(text.rfind("t_us,rabi_rad_s,detuning_ev,phase_rad\n", 0) == 0);
    CHECK(text.find("\n4,0,0,0\n") != std::string::npos);
    std::ostringstream tiny;
    CHECK_THROWS(write_schedule_csv(tiny, build_schedule({}), 1));
}
