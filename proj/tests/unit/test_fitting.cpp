#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "rydmap/fitting.hpp"

using namespace rydmap;

namespace {

const HardwareSpec kSpec;

std::vector<DatasetRecord> synthetic(const Lattice& lat, double v, double vnn, std::size_t n, std::uint64_t seed,
                                     double sigma = 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma > 0 ? sigma : 1.0);
    std::vector<DatasetRecord> out;
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t k = 1 + rng() % std::min<std::size_t>(10, lat.size());
        Configuration c(lat.size());
        while (c.count() < k) c.set(rng() % lat.size());
        const auto row = build_design_row(lat, c);
        double e = v * static_cast<double>(row.n_count) + vnn * row.pair_load;
        if (sigma > 0) e += noise(rng);
        out.push_back({c, e, "train", std::nullopt});
    }
    return out;
}

}  // namespace

TEST_CASE("design rows") {
    const auto hex = build_flake("hexagon");
    const auto p = hex.shell_pairs(1).front();
    Configuration c(6);
    c.set(p.i);
    c.set(p.j);
    auto row = build_design_row(hex, c);
    CHECK(row.n_count == 2);
    CHECK(row.pair_load == doctest::Approx(1.0));
    row = build_design_row(hex, Configuration::from_bitstring("111111"));
    CHECK(row.pair_load == doctest::Approx(6.0 + 6.0 / 27.0 + 3.0 / 64.0));
    const auto cell = build_supercell(1, 1);
    CHECK(build_design_row(cell, Configuration::from_bitstring("11")).pair_load ==
          doctest::Approx(3.0 + 3.0 / 64.0 + 6.0 / 343.0));
    CHECK_THROWS(build_design_row(hex, Configuration(5)));
}

TEST_CASE("noiseless data recover the parameters exactly") {
    const auto lat = build_supercell(3, 13);
    const double c6 = kSpec.c6_ev_um6();
    const double vnn = c6 / std::pow(1.8144, 6);
    const auto data = synthetic(lat, 3.613e-4, vnn, 300, 1);
    const auto fit = fit_model(data, lat, kSpec);
    CHECK(std::abs(fit.v_ev / 3.613e-4 - 1.0) < 1e-9);
    CHECK(std::abs(*fit.v_nn_ev / vnn - 1.0) < 1e-9);
    CHECK(*fit.r_nn_model_um == doctest::Approx(1.8144).epsilon(1e-9));
    CHECK(fit.train.mse_ev2 < 1e-24);
    CHECK(fit.model().v_nn() == doctest::Approx(vnn));
}

TEST_CASE("noisy data recover the parameters within 1%") {
    const auto lat = build_supercell(3, 13);
    const double vnn = kSpec.c6_ev_um6() / std::pow(1.6122, 6);
    const auto data = synthetic(lat, 3.613e-4, vnn, 2000, 2, 1e-6);
    const auto fit = fit_model(data, lat, kSpec);
    CHECK(std::abs(fit.v_ev / 3.613e-4 - 1.0) < 0.01);
    CHECK(std::abs(*fit.v_nn_ev / vnn - 1.0) < 0.01);
    double dot_n = 0.0, dot_p = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto row = build_design_row(lat, data[i].config);
        dot_n += fit.residuals_ev[i] * static_cast<double>(row.n_count);
        dot_p += fit.residuals_ev[i] * row.pair_load;
    }
    CHECK(std::abs(dot_n) < 1e-12);
    CHECK(std::abs(dot_p) < 1e-12);
}

TEST_CASE("record order and duplicates") {
    const auto lat = build_supercell(3, 13);
    const auto data = synthetic(lat, 3.6e-4, 1.6e-4, 200, 3, 1e-6);
    const auto fit = fit_model(data, lat, kSpec);
    auto shuffled = data;
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(8));
    const auto fit2 = fit_model(shuffled, lat, kSpec);
    CHECK(fit.v_ev == fit2.v_ev);
    CHECK(*fit.v_nn_ev == *fit2.v_nn_ev);
    auto doubled = data;
    doubled.insert(doubled.end(), data.begin(), data.end());
    const auto fit3 = fit_model(doubled, lat, kSpec);
    CHECK(fit3.v_ev == doctest::Approx(fit.v_ev).epsilon(1e-12));
    CHECK(*fit3.v_nn_ev == doctest::Approx(*fit.v_nn_ev).epsilon(1e-12));
}

TEST_CASE("degenerate datasets") {
    const auto lat = build_supercell(2, 2);
    std::vector<DatasetRecord> none;
    CHECK_THROWS_AS(fit_model(none, lat, kSpec), FitError);

    std::vector<DatasetRecord> zero = synthetic(lat, 0.0, 0.0, 20, 4);
    try {
        fit_model(zero, lat, kSpec);
        FAIL("expected FitError");
    } catch (const FitError& e) {
        CHECK(e.kind() == FitError::Kind::non_positive_pair);
    }

    // Two rows with the same n_count / pair_load ratio.
    const auto p = lat.shell_pairs(1).front();
    Configuration a(8);
    a.set(p.i);
    a.set(p.j);
    std::vector<DatasetRecord> collinear{{a, 1.0, "train", {}}, {a, 2.0, "train", {}}};
    try {
        fit_model(collinear, lat, kSpec);
        FAIL("expected FitError");
    } catch (const FitError& e) {
        CHECK(e.kind() == FitError::Kind::singular);
    }

    std::vector<DatasetRecord> singles{{Configuration::from_bitstring("10000000"), 2.0, "train", {}},
                                       {Configuration::from_bitstring("01000000"), 2.0, "train", {}}};
    const auto only_v = fit_model(singles, lat, kSpec);
    CHECK(only_v.v_ev == doctest::Approx(2.0));
    CHECK_FALSE(only_v.v_nn_ev.has_value());
    CHECK_THROWS_AS(only_v.model(), FitError);

    std::vector<DatasetRecord> mixed{{Configuration(8), 0.0, "train", {}}, {Configuration(7), 0.0, "train", {}}};
    try {
        fit_model(mixed, lat, kSpec);
        FAIL("expected FitError");
    } catch (const FitError& e) {
        CHECK(e.kind() == FitError::Kind::length_mismatch);
    }
}

TEST_CASE("regression metrics") {
    const std::vector<double> ref{1, 2, 3, 4};
    const std::vector<double> pred{2, 4, 6, 8};
    const auto m = regression_metrics(pred, ref);
    CHECK(m.n == 4);
    CHECK(*m.pearson_r == doctest::Approx(1.0));
    CHECK(*m.spearman_rho == doctest::Approx(1.0));
    CHECK(m.mse_ev2 == doctest::Approx(7.5));
    const auto rev = regression_metrics(std::vector<double>{4, 3, 2, 1}, ref);
    CHECK(*rev.spearman_rho == doctest::Approx(-1.0));
    const auto flat = regression_metrics(std::vector<double>{1, 1, 1, 1}, ref);
    CHECK_FALSE(flat.pearson_r.has_value());
    // Ties get average ranks: ranks (1.5, 1.5, 3) vs (1, 2, 3).
    const auto ties = regression_metrics(std::vector<double>{0, 0, 1}, std::vector<double>{1, 2, 3});
    CHECK(*ties.spearman_rho == doctest::Approx(std::sqrt(3.0) / 2.0));
    CHECK_THROWS(regression_metrics(std::vector<double>{1}, ref));
}

TEST_CASE("dataset CSV") {
    std::istringstream good("bitstring,energy_ev,tag,sic_id\n# comment\n\n0110,0.5,train,3\n1000,0.25,test,4\n");
    const auto recs = read_dataset_csv(good);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].config.to_bitstring() == "0110");
    CHECK(recs[1].tag == "test");
    CHECK(*recs[1].sic_id == 4);
    std::stringstream buf;
    write_dataset_csv(buf, recs);
    const auto back = read_dataset_csv(buf);
    CHECK(back[0].energy_ev == 0.5);
    CHECK(back[1].config == recs[1].config);

    std::istringstream malformed("bitstring,energy_ev,tag\n0110,0.5,train\n01x0,0.5,train\n");
    CHECK_THROWS_WITH(read_dataset_csv(malformed), doctest::Contains("line 3"));
    std::istringstream short_row("bitstring,energy_ev,tag\n0110,0.5\n");
    CHECK_THROWS_WITH(read_dataset_csv(short_row), doctest::Contains("line 2"));
    std::istringstream width("bitstring,energy_ev,tag\n0110,0.5,train\n011,0.5,train\n");
    CHECK_THROWS_WITH(read_dataset_csv(width), doctest::Contains("line 3"));
    std::istringstream empty("");
    CHECK_THROWS_WITH_AS(read_dataset_csv(empty), "no records", FitError);
    std::istringstream header_only("bitstring,energy_ev,tag\n");
    CHECK_THROWS_AS(read_dataset_csv(header_only), FitError);
}

TEST_CASE("held-out metrics") {
    const auto lat = build_supercell(3, 13);
    const auto train = synthetic(lat, 3.6e-4, 1.6e-4, 100, 5);
    const auto test = synthetic(lat, 3.6e-4, 1.6e-4, 50, 6);
    const auto fit = fit_model(train, lat, kSpec);
    const auto m = evaluate_metrics(fit, test, lat);
    CHECK(m.n == 50);
    CHECK(m.mse_ev2 < 1e-24);
    CHECK(*m.pearson_r == doctest::Approx(1.0));
}
