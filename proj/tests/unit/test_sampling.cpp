#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rydmap/enumeration.hpp"
#include "rydmap/rescaling.hpp"
#include "rydmap/sampling.hpp"

using namespace rydmap;

namespace {

constexpr double kKb = 8.617333262e-5;

QuadraticEnergy two_site() {
    QuadraticEnergy q(2);
    q.set_field(0, -1e-4);
    q.set_field(1, 5e-5);
    q.add_coupling(0, 1, 2e-4);
    return q;
}

}  // namespace

TEST_CASE("exact sampler basics") {
    const auto q = two_site();
    const auto none = exact_boltzmann_sample(q, 1.0, 0, 1);
    CHECK(none.records.empty());
    CHECK(none.retained_fraction() == 0.0);

    const auto cold = exact_boltzmann_sample(q, 1e-3, 50, 1);
    for (const auto& r : cold.records) CHECK(r.bits.to_bitstring() == "10");
    CHECK(cold.valid_count() == 50);
    CHECK(cold.context.backend == "exact");

    const auto a = exact_boltzmann_sample(q, 1.0, 200, 42);
    const auto b = exact_boltzmann_sample(q, 1.0, 200, 42);
    const auto c = exact_boltzmann_sample(q, 1.0, 200, 43);
    bool same = true, differ = false;
    for (std::size_t i = 0; i < 200; ++i) {
        same = same && a.records[i].bits == b.records[i].bits;
        differ = differ || a.records[i].bits != c.records[i].bits;
    }
    CHECK(same);
    CHECK(differ);
}

TEST_CASE("exact sampler matches the enumerated pmf") {
    const auto q = two_site();
    const double t = 1.5;
    const auto s = exact_boltzmann_sample(q, t, 100000, 7);
    const auto ref = enumerate_stats(q, t);
    CHECK(tvd(concentration_pmf(s), ref.concentration_pmf) < 0.01);
    CHECK_THROWS_AS(exact_boltzmann_sample(QuadraticEnergy(29), 1.0, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(exact_boltzmann_sample(q, 0.0, 1, 1), std::invalid_argument);
}

TEST_CASE("Metropolis at infinite temperature is uniform") {
    QuadraticEnergy q(3);
    q.set_field(0, 1.0);
    q.add_coupling(1, 2, -3.0);
    const auto s = metropolis_sample(q, std::numeric_limits<double>::infinity(), 8000, 5);
    std::vector<double> counts(8, 0.0);
    for (const auto& r : s.records) counts[r.bits.to_mask()] += 1.0;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
    CHECK(chi2 < 24.32);
}

TEST_CASE("Metropolis single site follows the two-level Boltzmann law") {
    const double det = 2e-8, t = 41e-6;
    QuadraticEnergy q(1);
    q.set_field(0, -det);
    const auto s = metropolis_sample(q, t, 20000, 9);
    const double p = 1.0 / (1.0 + std::exp(-det / (kKb * t)));
    const double se = std::sqrt(p * (1 - p) / 20000.0);
    CHECK(std::abs(qpu_mean_concentration(s) - p) < 4 * se);
}

TEST_CASE("Metropolis is deterministic and thread independent") {
    const auto layout = scale_to_hardware(build_flake("hexagon"), 4.0);
    const auto q = hardware_hamiltonian(layout, HardwareSpec{}, 2e-8);
    MetropolisOptions one;
    one.threads = 1;
    MetropolisOptions many;
    many.threads = 3;
    const auto a = metropolis_sample(q, 41e-6, 100, 3, one);
    const auto b = metropolis_sample(q, 41e-6, 100, 3, many);
    for (std::size_t i = 0; i < 100; ++i) CHECK(a.records[i].bits == b.records[i].bits);
}

TEST_CASE("mean concentration over valid records") {
    SampleSet s;
    s.shots_requested = 3;
    s.records.push_back({Configuration::from_bitstring("110"), Configuration::from_bitstring("111"), true});
    s.records.push_back({Configuration::from_bitstring("100"), Configuration::from_bitstring("111"), true});
    s.records.push_back({Configuration(3), Configuration::from_bitstring("101"), false});
    CHECK(qpu_mean_concentration(s) == doctest::Approx(1.5));
    CHECK(s.retained_fraction() == doctest::Approx(2.0 / 3.0));
    const auto pmf = concentration_pmf(s);
    CHECK(pmf == std::vector<double>{0.0, 0.5, 0.5, 0.0});
    SampleSet empty;
    CHECK_THROWS_WITH(qpu_mean_concentration(empty), "no valid records");
}

TEST_CASE("mock QPU") {
    const auto layout = scale_to_hardware(build_flake("hexagon"), 4.0);
    const HardwareSpec spec;
    QpuOptions clean;
    clean.noise.p_fill = 1.0;
    clean.backend = ThermalBackend::exact;
    const auto m = mock_qpu_run(layout, spec, 3e-8, 41e-6, 500, 11, clean);
    const auto e = exact_boltzmann_sample(hardware_hamiltonian(layout, spec, 3e-8), 41e-6, 500, 11);
    REQUIRE(m.records.size() == 500);
    for (std::size_t i = 0; i < 500; ++i) CHECK(m.records[i].bits == e.records[i].bits);
    CHECK(m.retained_fraction() == 1.0);

    QpuOptions lossy;
    lossy.noise.p_fill = 0.9;
    const auto l = mock_qpu_run(layout, spec, 3e-8, 41e-6, 4000, 12, lossy);
    const double p = std::pow(0.9, 6);
    CHECK(std::abs(l.retained_fraction() - p) < 4 * std::sqrt(p * (1 - p) / 4000));
    for (const auto& r : l.records) {
        CHECK(r.valid == r.fill.all());
        if (!r.valid) CHECK(r.bits.none());
    }

    QpuOptions flips;
    flips.noise.p_fill = 1.0;
    flips.noise.p_readout_flip = 1.0;
    flips.backend = ThermalBackend::exact;
    const auto f = mock_qpu_run(layout, spec, 3e-8, 41e-6, 50, 11, flips);
    for (std::size_t i = 0; i < 50; ++i) CHECK(f.records[i].bits.count() == 6 - e.records[i].bits.count());

    const auto close = scale_to_hardware(build_flake("hexagon"), 3.9);
    CHECK_THROWS_WITH_AS(mock_qpu_run(close, spec, 0.0, 41e-6, 1, 1), doctest::Contains("invalid layout"),
                         std::invalid_argument);
    QpuOptions bad;
    bad.noise.p_fill = 1.5;
    CHECK_THROWS(mock_qpu_run(layout, spec, 0.0, 41e-6, 1, 1, bad));
    CHECK(parse_backend("metropolis") == ThermalBackend::metropolis);
    CHECK_THROWS(parse_backend("quantum"));
}

TEST_CASE("energy histograms of samples") {
    const auto q = two_site();
    const auto s = exact_boltzmann_sample(q, 1.0, 1000, 2);
    const auto h = energy_histogram(s, q, 4);
    CHECK(h.edges_ev.size() == 5);
    double total = 0.0;
    for (double c : h.count) total += c;
    CHECK(total == 1000.0);
    const std::vector<double> edges{-1.0, 0.0, 1.0};
    const auto h2 = energy_histogram(s, q, edges);
    CHECK(h2.count.size() == 2);
    CHECK_THROWS(energy_histogram(s, q, std::vector<double>{1.0, 0.0}));
}

TEST_CASE("uniform Monte Carlo") {
    QuadraticEnergy q1(4);
    const auto one = uniform_mc_stats(q1, 1.0, 1, 1, Proposal::parse("uniform-bits"));
    CHECK(one.ess == doctest::Approx(1.0));
    CHECK(one.n_samples == 1);

    const auto layout = scale_to_hardware(build_flake("4x3"), 5.0);
    const auto q = hardware_hamiltonian(layout, HardwareSpec{}, 1e-8);
    const double t = 200e-6;
    const auto exact = enumerate_stats(q, t);
    for (const auto* text : {"uniform-bits", "stratified:0-12"}) {
        const auto mc = uniform_mc_stats(q, t, 200000, 17, Proposal::parse(text));
        CHECK(std::abs(mc.stats.mean_concentration - exact.mean_concentration) < 3 * mc.std_error + 1e-9);
        CHECK(mc.stats.log_z == doctest::Approx(exact.log_z).epsilon(0.01));
    }
    const auto a = uniform_mc_stats(q, t, 5000, 4, {}, 1);
    const auto b = uniform_mc_stats(q, t, 5000, 4, {}, 3);
    CHECK(a.stats.concentration_pmf == b.stats.concentration_pmf);
    CHECK_THROWS(uniform_mc_stats(q, t, 0, 1));
}

TEST_CASE("proposal parsing") {
    CHECK(Proposal::parse("uniform-bits").kind == Proposal::Kind::uniform_bits);
    const auto s = Proposal::parse("stratified:2-7");
    CHECK(s.k_min == 2);
    CHECK(s.k_max == 7);
    CHECK(s.to_string() == "stratified:2-7");
    CHECK(Proposal::parse("stratified").k_max == 10);
    CHECK_THROWS(Proposal::parse("stratified:5-2"));
    CHECK_THROWS(Proposal::parse("gibbs"));
}

TEST_CASE("total variation distance") {
    CHECK(tvd(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 1.0);
    CHECK(tvd(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5}) == 0.0);
    CHECK(tvd(std::vector<double>{0.25, 0.75}, std::vector<double>{0.5, 0.5}) == doctest::Approx(0.25));
    CHECK_THROWS(tvd(std::vector<double>{1}, std::vector<double>{0.5, 0.5}));
    CHECK_THROWS(tvd(std::vector<double>{0.7, 0.7}, std::vector<double>{0.5, 0.5}));
    CHECK_THROWS(tvd(std::vector<double>{-0.5, 1.5}, std::vector<double>{0.5, 0.5}));
}

TEST_CASE("grids") {
    const auto g = linear_grid(-1.0, 1.0, 5);
    CHECK(g == std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0});
    CHECK(linear_grid(3.0, 4.0, 1) == std::vector<double>{3.0});
    const auto t = default_temperature_grid();
    CHECK(t.size() == 60);
    CHECK(t.front() == doctest::Approx(1e-6));
    CHECK(t[40] == doctest::Approx(41e-6));
    CHECK(t.back() == doctest::Approx(60e-6));
}

TEST_CASE("sweeps and temperature fit on exact curves") {
    const auto lat = build_flake("hexagon");
    const auto model = EnergyModel::from_r_nn(3.613e-4, 1.6122, HardwareSpec{}.c6_ev_um6());
    const HardwareSpec spec;
    const auto layout = scale_to_hardware(lat, 4.0);
    const RescaledMapping map(model, 4.0, spec);
    const auto dets = linear_grid(-spec.detuning_max_ev, spec.detuning_max_ev, 10);
    const auto grid = default_temperature_grid();

    const auto hw = sweep_hardware_exact(layout, map, dets, grid[22]);
    REQUIRE(hw.points.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        const auto direct = enumerate_stats(layout, spec, dets[i], grid[22]);
        CHECK(hw.points[i].mean_concentration == doctest::Approx(direct.mean_concentration).epsilon(1e-12));
        CHECK(hw.points[i].delta_mu_ev == doctest::Approx(map.mu_for(dets[i])));
        if (i > 0) CHECK(hw.points[i].mean_concentration >= hw.points[i - 1].mean_concentration);
    }
    const auto fit = fit_effective_temperature(hw, layout, spec, grid);
    CHECK(fit.t_star_k == grid[22]);
    CHECK(fit.rmse_at_optimum < 1e-12);
    CHECK(fit.rmse.size() == 60);

    std::vector<double> mus;
    for (double d : dets) mus.push_back(map.mu_for(d));
    const auto mat = sweep_material_exact(lat, model.with_range(PairRange::untruncated), map, mus,
                                          map.effective_temperature(grid[22]));
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(tvd(mat.points[i].concentration_pmf, hw.points[i].concentration_pmf) < 1e-10);
        CHECK(mat.points[i].detuning_ev == doctest::Approx(dets[i]));
    }

    SweepResult one;
    one.points.push_back(hw.points[0]);
    CHECK_THROWS(fit_effective_temperature(one, layout, spec, grid));
    CHECK_THROWS(fit_effective_temperature(hw, layout, spec, std::vector<double>{}));
}

TEST_CASE("JSONL round trip and errors") {
    const auto layout = scale_to_hardware(build_flake("hexagon"), 4.0);
    const auto s = mock_qpu_run(layout, HardwareSpec{}, 1e-8, 41e-6, 40, 3);
    std::stringstream buf;
    write_jsonl(buf, s);
    const auto back = read_jsonl(buf);
    REQUIRE(back.records.size() == 40);
    for (std::size_t i = 0; i < 40; ++i) {
        CHECK(back.records[i].bits == s.records[i].bits);
        CHECK(back.records[i].fill == s.records[i].fill);
        CHECK(back.records[i].valid == s.records[i].valid);
    }
    std::istringstream bad(R"({"bits":"01","fill":"11","valid":true}
{"bits":"01","fill":"10","valid":true}
)");
    CHECK_THROWS_WITH(read_jsonl(bad), doctest::Contains("line 2"));
}

TEST_CASE("sweep CSV round trip") {
    SweepResult r;
    r.points.push_back({-1e-8, -2e-4, 0.5, {0.5, 0.5}, -3.25});
    r.points.push_back({1e-8, -1e-4, 0.75, {0.25, 0.75}, std::nullopt});
    std::stringstream buf;
    write_sweep_csv(buf, r);
    const auto text = buf.str();
    CHECK(text.rfind(std::string(kSweepCsvHeader), 0) == 0);
    const auto back = read_sweep_csv(buf);
    REQUIRE(back.points.size() == 2);
    CHECK(back.points[0].detuning_ev == -1e-8);
    CHECK(back.points[0].concentration_pmf == std::vector<double>{0.5, 0.5});
    CHECK(back.points[0].log_z == -3.25);
    CHECK_FALSE(back.points[1].log_z.has_value());
    std::istringstream bad("delta_g_ev,delta_mu_ev,mean_conc,conc_pmf_json,log_z\n1,2,3\n");
    CHECK_THROWS_WITH(read_sweep_csv(bad), doctest::Contains("line 2"));
}
