// One PASS/FAIL line per acceptance criterion; exits non-zero if any fail.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "rydmap/enumeration.hpp"
#include "rydmap/fitting.hpp"
#include "rydmap/rescaling.hpp"
#include "rydmap/sampling.hpp"
#include "rydmap/schedule.hpp"
#include "rydmap/symmetry.hpp"

using namespace rydmap;

namespace {

constexpr double kV = 3.613e-4;
constexpr double kRModel = 1.6122;
constexpr double kKb = 8.617333262e-5;
constexpr double kDeviceT = 41e-6;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("[%s] AC%d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
    char buf[200];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

bool within(double value, double target, double rel) { return std::abs(value - target) <= rel * std::abs(target); }

EnergyModel reference_model(PairRange range = PairRange::four_shells) {
    return EnergyModel::from_r_nn(kV, kRModel, HardwareSpec{}.c6_ev_um6(), range);
}

Outcome unit_conversion() {
    const HardwareSpec spec;
    const double c6 = spec.c6_ev_um6();
    const auto pair = scale_to_hardware(Lattice::from_positions({{0.0, 0.0}, {1.0, 0.0}}), 5.0);
    const double e = hardware_energy(pair, spec, 0.0, Configuration::from_bitstring("11"));
    return {within(c6, 3.567e-3, 0.005) && within(e, 2.28e-7, 0.01), fmt("C6 = %.5g eV um^6, pair at 5 um = %.4g eV", c6, e)};
}

Outcome temperature_table() {
    const double targets[3] = {9.7e-3, 1.9e-2, 3.6e-2};
    const double spacings[3] = {4.0, 4.5, 5.0};
    bool ok = true;
    double t[3];
    for (int i = 0; i < 3; ++i) {
        t[i] = effective_temperature(kDeviceT, alpha_v(spacings[i], kRModel));
        ok = ok && within(t[i], targets[i], 0.05);
    }
    return {ok, fmt("T' = %.4g / %.4g / %.4g K", t[0], t[1], t[2])};
}

Outcome alpha_ratios() {
    const double r1 = alpha_v(4.5, kRModel) / alpha_v(4.0, kRModel);
    const double r2 = alpha_v(5.0, kRModel) / alpha_v(4.0, kRModel);
    const double e1 = std::abs(r1 / std::pow(9.0 / 8.0, 6) - 1.0);
    const double e2 = std::abs(r2 / std::pow(5.0 / 4.0, 6) - 1.0);
    return {e1 <= 1e-12 && e2 <= 1e-12, fmt("relative errors %.2g, %.2g", e1, e2)};
}

Outcome scaling_equivalence() {
    const auto lattice = build_flake("4x3");
    const auto model = reference_model(PairRange::untruncated);
    const HardwareSpec spec;
    const double r_hw = 4.0;
    const auto layout = scale_to_hardware(lattice, r_hw);
    const RescaledMapping map(model, r_hw, spec);
    const double t_eff = map.effective_temperature(kDeviceT);
    const auto range = map.mu_range();
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> mu_dist(range.lo_ev, range.hi_ev);
    double first_log = 0.0, worst = 0.0;
    for (int s = 0; s < 10000; ++s) {
        const auto config = Configuration::from_mask(rng() & 0xFFFu, 12);
        const double mu = mu_dist(rng);
        const double e_mat = material_energy(model, lattice, config, {mu});
        const double e_hw = hardware_energy(layout, spec, map.detuning_for(mu), config);
        // log of w_material / w_hardware
        const double log_ratio = -e_mat / (kKb * t_eff) + e_hw / (kKb * kDeviceT);
        if (s == 0) first_log = log_ratio;
        worst = std::max(worst, std::abs(std::expm1(log_ratio - first_log)));
    }
    return {worst <= 1e-10, fmt("max |ratio / ratio_0 - 1| = %.3g over 10^4 pairs", worst)};
}

Outcome oracle_equivalence() {
    const auto lattice = build_flake("2x8");
    const auto model = reference_model();
    const ChemicalPotential mu{-3.4e-4};
    const double t = 9.7e-3;
    const auto q = material_hamiltonian(model, lattice, mu);
    const std::size_t n = lattice.size();
    std::vector<double> direct(std::size_t{1} << n);
    for (std::uint64_t m = 0; m < direct.size(); ++m) direct[m] = material_energy(model, lattice, Configuration::from_mask(m, n), mu);
    double worst = 0.0;
    std::size_t visits = 0;
    for_each_configuration(q, [&](std::uint64_t m, double e) {
        worst = std::max(worst, std::abs(e - direct[m]));
        ++visits;
    });
    const double ground = *std::min_element(direct.begin(), direct.end());
    std::vector<double> pmf(n + 1, 0.0);
    double z = 0.0;
    for (std::uint64_t m = 0; m < direct.size(); ++m) {
        const double w = std::exp(-(direct[m] - ground) / (kKb * t));
        pmf[static_cast<std::size_t>(std::popcount(m))] += w;
        z += w;
    }
    for (double& p : pmf) p /= z;
    const auto stats = enumerate_stats(q, t);
    const double d = tvd(stats.concentration_pmf, pmf);
    return {visits == direct.size() && worst <= 1e-12 && d <= 1e-12,
            fmt("max energy error %.3g eV, pmf TVD %.3g over %.0f configurations", worst, d, static_cast<double>(visits))};
}

Outcome monotonicity() {
    const auto lattice = build_flake("flake28");
    const auto model = reference_model();
    const RescaledMapping map(model, 4.0, HardwareSpec{});
    const auto range = map.mu_range();
    const auto grid = linear_grid(range.lo_ev, range.hi_ev, 10);
    const auto t0 = std::chrono::steady_clock::now();
    const auto sweep = sweep_material_exact(lattice, model, map, grid, 9.7e-3);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    int violations = 0;
    for (std::size_t i = 1; i < sweep.points.size(); ++i) {
        if (sweep.points[i].mean_concentration > sweep.points[i - 1].mean_concentration) ++violations;
    }
    return {violations == 0 && sweep.points.size() == 10,
            fmt("<n> from %.4g to %.4g, violations %.0f", sweep.points.front().mean_concentration,
                sweep.points.back().mean_concentration, violations) +
                fmt(", %.1f s for the whole 2^28 sweep", secs)};
}

Outcome closed_loop_temperature() {
    const auto lattice = std::make_shared<const Lattice>(build_flake("flake28"));
    const HardwareSpec spec;
    const auto layout = scale_to_hardware(lattice, 4.0);
    const RescaledMapping map(reference_model(), 4.0, spec);
    const auto detunings = linear_grid(-spec.detuning_max_ev, spec.detuning_max_ev, 10);
    SweepResult measured;
    for (std::size_t i = 0; i < detunings.size(); ++i) {
        const auto q = hardware_hamiltonian(layout, spec, detunings[i]);
        const auto shots = exact_boltzmann_sample(q, kDeviceT, 10000, 4100 + i);
        SweepPoint p;
        p.detuning_ev = detunings[i];
        p.delta_mu_ev = map.mu_for(detunings[i]);
        p.mean_concentration = qpu_mean_concentration(shots);
        p.concentration_pmf = concentration_pmf(shots);
        measured.points.push_back(std::move(p));
    }
    const auto grid = default_temperature_grid();
    const auto fit = fit_effective_temperature(measured, layout, spec, grid);
    const bool exact_t = std::abs(fit.t_star_k - kDeviceT) < 1e-12;
    return {exact_t && fit.rmse_at_optimum < 1e-2,
            fmt("T* = %.6g K, RMSE at optimum %.3g", fit.t_star_k, fit.rmse_at_optimum)};
}

Outcome sampler_fidelity() {
    const auto layout = scale_to_hardware(build_flake("4x3"), 4.0);
    const HardwareSpec spec;
    const double detuning = 2e-8;
    const auto q = hardware_hamiltonian(layout, spec, detuning);
    const auto exact = enumerate_stats(q, kDeviceT);
    const auto draws = exact_boltzmann_sample(q, kDeviceT, 100000, 8);
    const double d_exact = tvd(concentration_pmf(draws), exact.concentration_pmf);
    const auto chains = metropolis_sample(q, kDeviceT, 10000, 8);
    const auto draws_1e4 = exact_boltzmann_sample(q, kDeviceT, 10000, 9);
    const double d_metro = tvd(concentration_pmf(chains), concentration_pmf(draws_1e4));
    const auto again = metropolis_sample(q, kDeviceT, 10000, 8);
    bool same = true;
    for (std::size_t i = 0; i < chains.records.size(); ++i) same = same && chains.records[i].bits == again.records[i].bits;
    return {d_exact < 0.05 && d_metro < 0.05 && same,
            fmt("exact vs enumeration TVD %.4f, Metropolis vs exact TVD %.4f (Delta_g = %.3g eV)", d_exact, d_metro, detuning)};
}

Outcome combinatorial_anchors() {
    const bool binom = binomial(78, 2) == 3003.0 && binomial(78, 3) == 76076.0;
    const auto layout = scale_to_hardware(build_flake("flake28"), 4.0);
    QpuOptions opts;
    opts.noise.p_fill = 0.99;
    const auto run = mock_qpu_run(layout, HardwareSpec{}, 0.0, kDeviceT, 10000, 99, opts);
    const double f = run.retained_fraction();
    const double sigma = std::sqrt(0.755 * (1 - 0.755) / 10000.0);
    return {binom && std::abs(f - 0.755) <= 3 * sigma,
            fmt("C(78,2) = %.0f, C(78,3) = %.0f, retained fraction %.4f", binomial(78, 2), binomial(78, 3), f) +
                fmt(" (|diff| / sigma = %.2f)", std::abs(f - 0.755) / sigma)};
}

Outcome fit_exactness() {
    const auto lattice = build_supercell(3, 13);
    const HardwareSpec spec;
    std::mt19937_64 rng(77);
    auto random_config = [&] {
        Configuration c(lattice.size());
        const std::size_t k = 1 + rng() % 10;
        while (c.count() < k) c.set(rng() % lattice.size());
        return c;
    };
    double worst_exact = 0.0;
    const double cases[4][2] = {{3.613e-4, 2.03e-4}, {1.0, 0.5}, {2e-6, 7e-3}, {0.1, 1e-5}};
    for (const auto& c : cases) {
        for (std::size_t rows : {2u, 50u}) {
            std::vector<DatasetRecord> data;
            while (data.size() < rows) {
                const auto cfg = random_config();
                const auto row = build_design_row(lattice, cfg);
                // Two informative rows: one with and one without pair terms.
                if (rows == 2 && (data.empty() ? row.pair_load != 0.0 : row.pair_load == 0.0)) continue;
                data.push_back({cfg, c[0] * static_cast<double>(row.n_count) + c[1] * row.pair_load, "train", {}});
            }
            const auto fit = fit_model(data, lattice, spec);
            worst_exact = std::max({worst_exact, std::abs(fit.v_ev / c[0] - 1.0), std::abs(*fit.v_nn_ev / c[1] - 1.0)});
        }
    }
    std::normal_distribution<double> noise(0.0, 1e-6);
    const double v = 3.613e-4, vnn = spec.c6_ev_um6() / std::pow(kRModel, 6);
    std::vector<DatasetRecord> noisy;
    for (int r = 0; r < 2000; ++r) {
        const auto cfg = random_config();
        const auto row = build_design_row(lattice, cfg);
        noisy.push_back({cfg, v * static_cast<double>(row.n_count) + vnn * row.pair_load + noise(rng), "train", {}});
    }
    const auto fit = fit_model(noisy, lattice, spec);
    const double ev = std::abs(fit.v_ev / v - 1.0), enn = std::abs(*fit.v_nn_ev / vnn - 1.0);
    return {worst_exact <= 1e-9 && ev <= 0.01 && enn <= 0.01,
            fmt("noiseless max rel error %.3g; noisy rel errors V %.3g, V_NN %.3g", worst_exact, ev, enn)};
}

double burnside_count(const SymmetryGroup& g, std::size_t k) {
    double total = 0.0;
    for (const auto& perm : g.permutations) {
        std::vector<bool> seen(perm.size(), false);
        std::vector<double> poly{1.0};
        for (std::size_t s = 0; s < perm.size(); ++s) {
            if (seen[s]) continue;
            std::size_t len = 0;
            for (std::size_t x = s; !seen[x]; x = static_cast<std::size_t>(perm[x])) {
                seen[x] = true;
                ++len;
            }
            std::vector<double> next(poly.size() + len, 0.0);
            for (std::size_t d = 0; d < poly.size(); ++d) {
                next[d] += poly[d];
                next[d + len] += poly[d];
            }
            poly = std::move(next);
        }
        total += k < poly.size() ? poly[k] : 0.0;
    }
    return total / static_cast<double>(g.order());
}

Outcome symmetry_correctness() {
    const auto model = reference_model();
    std::string detail;
    bool ok = true;
    double worst_split = 0.0;
    for (int n : {2, 3}) {
        const auto lattice = build_supercell(n, n);
        const auto group = automorphisms(lattice);
        detail += (detail.empty() ? "" : "; ") + std::to_string(n) + "x" + std::to_string(n) + " |G| = " +
                  std::to_string(group.order()) + ", SICs";
        for (std::size_t k = 1; k <= 3; ++k) {
            std::vector<Configuration> configs;
            std::vector<bool> pick(lattice.size(), false);
            std::fill(pick.begin(), pick.begin() + static_cast<long>(k), true);
            do {
                Configuration c(lattice.size());
                for (std::size_t i = 0; i < pick.size(); ++i) c.set(i, pick[i]);
                configs.push_back(c);
            } while (std::prev_permutation(pick.begin(), pick.end()));
            const auto sics = reduce_to_sic(configs, group);
            const double expected = burnside_count(group, k);
            ok = ok && static_cast<double>(sics.size()) == expected;
            detail += " " + std::to_string(sics.size());
            for (const auto& s : sics) {
                ok = ok && group.order() % s.multiplicity == 0;
                const auto orbit = expand_orbit(s.representative, group);
                ok = ok && orbit.multiplicity() == s.multiplicity;
                const double e0 = material_energy(model, lattice, s.representative, {});
                for (const auto& m : orbit.members) worst_split = std::max(worst_split, std::abs(material_energy(model, lattice, m, {}) - e0));
            }
        }
    }
    ok = ok && worst_split <= 1e-12;
    return {ok, detail + fmt(" (all equal Burnside); max orbit energy spread %.3g eV", worst_split)};
}

Outcome schedule_contract() {
    const HardwareSpec spec;
    const auto s = build_schedule({});
    const auto& d = s.detuning.knots;
    bool ok = s.total_time_us == 4.0 && d.size() == 4 && d[1].t_us == 0.0625 * 4.0 &&
              d[2].t_us == 4.0 - 0.0625 * 4.0 && s.rabi.at(0.0) == 0.0 && s.rabi.at(4.0) == 0.0;
    for (const auto& k : s.phase.knots) ok = ok && k.value == 0.0;
    ok = ok && validate_schedule(s, spec).valid();
    ScheduleParams high;
    high.detuning_final_ev = 8.23e-8;
    ScheduleParams low;
    low.detuning_initial_ev = -8.23e-8;
    const bool rejects_detuning = validate_schedule(build_schedule(high), spec).has("detuning_range") &&
                                  validate_schedule(build_schedule(low), spec).has("detuning_range");
    const auto pair = scale_to_hardware(Lattice::from_positions({{0.0, 0.0}, {1.0, 0.0}}), 3.9);
    const bool rejects_pair = validate_layout(pair, spec).has("min_atom_distance");
    return {ok && rejects_detuning && rejects_pair,
            fmt("holds at %.4g and %.4g us of 4 us; validator rejects +/-8.23e-8 eV and a %.2g um pair", d[1].t_us,
                d[2].t_us, 3.9)};
}

}  // namespace

int main() {
    report(1, "unit conversion", unit_conversion);
    report(2, "effective temperature table", temperature_table);
    report(3, "alpha_v ratio identities", alpha_ratios);
    report(4, "scaling equivalence", scaling_equivalence);
    report(5, "Gray-code oracle equivalence", oracle_equivalence);
    report(6, "grand-canonical monotonicity", monotonicity);
    report(7, "closed-loop temperature recovery", closed_loop_temperature);
    report(8, "sampler fidelity", sampler_fidelity);
    report(9, "combinatorial anchors", combinatorial_anchors);
    report(10, "fit exactness", fit_exactness);
    report(11, "symmetry correctness", symmetry_correctness);
    report(12, "schedule contract", schedule_contract);
    std::printf("%d of 12 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
