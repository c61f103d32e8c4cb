#include "rydmap/enumeration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gray_kernel.hpp"
#include "rydmap/units.hpp"

namespace rydmap {

namespace {

using detail::ChunkPlan;
using detail::GrayKernel;
using detail::kUnderflowExponent;

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_enumerable(std::size_t n) {
    if (n > kEnumerationCap) {
        throw std::invalid_argument("site count over enumeration cap (" + std::to_string(n) + " > " +
                                    std::to_string(kEnumerationCap) + ")");
    }
}

/// 1 / (k_B T); zero for T = +inf.
double inverse_thermal_energy(double temperature_k) {
    if (std::isnan(temperature_k) || !(temperature_k > 0.0)) {
        throw std::invalid_argument("temperature must be positive");
    }
    if (std::isinf(temperature_k)) return 0.0;
    return 1.0 / units::thermal_energy_ev(temperature_k);
}

struct Extremes {
    double min = kInf;
    double max = -kInf;
    std::uint64_t argmin = 0;
};

}  // namespace

double binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (std::size_t i = 0; i < k; ++i) c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
    return c;
}

BoltzmannStats enumerate_stats(const QuadraticEnergy& energy, double temperature_k, const EngineOptions& options) {
    const std::size_t n = energy.size();
    require_enumerable(n);
    const double beta = inverse_thermal_energy(temperature_k);
    const std::size_t bins = std::max<std::size_t>(options.histogram_bins, 1);
    const GrayKernel kernel(energy);
    const ChunkPlan plan(n);

    // Pass 1: extremes.
    std::vector<Extremes> chunk_ext(plan.chunks);
    detail::parallel_tasks(plan.chunks, options.threads, [&](std::size_t c) {
        Extremes ext;
        kernel.run(plan.begin(c), plan.end(c), [&](std::uint64_t state, double e) {
            if (e < ext.min) {
                ext.min = e;
                ext.argmin = state;
            }
            ext.max = std::max(ext.max, e);
        });
        chunk_ext[c] = ext;
    });
    Extremes ext;
    for (const auto& c : chunk_ext) {
        if (c.min < ext.min) {
            ext.min = c.min;
            ext.argmin = c.argmin;
        }
        ext.max = std::max(ext.max, c.max);
    }

    const double lo = ext.min;
    double hi = ext.max;
    if (!(hi > lo)) hi = lo + std::max(std::abs(lo) * 1e-12, 1e-30);
    const double inv_width = static_cast<double>(bins) / (hi - lo);

    // Pass 2: weights relative to the minimum energy.
    struct Partial {
        std::vector<double> by_count;
        std::vector<double> mass;
        std::vector<double> states;
    };
    std::vector<Partial> partial(plan.chunks);
    detail::parallel_tasks(plan.chunks, options.threads, [&](std::size_t c) {
        Partial p{std::vector<double>(n + 1, 0.0), std::vector<double>(bins, 0.0), std::vector<double>(bins, 0.0)};
        kernel.run(plan.begin(c), plan.end(c), [&](std::uint64_t state, double e) {
            const auto bin = std::min(bins - 1, static_cast<std::size_t>((e - lo) * inv_width));
            p.states[bin] += 1.0;
            const double x = (e - lo) * beta;
            if (x > kUnderflowExponent) return;
            const double w = std::exp(-x);
            p.by_count[static_cast<std::size_t>(std::popcount(state))] += w;
            p.mass[bin] += w;
        });
        partial[c] = std::move(p);
    });

    BoltzmannStats stats;
    std::vector<double> by_count(n + 1, 0.0);
    EnergyHistogram hist{std::vector<double>(bins + 1), std::vector<double>(bins, 0.0), std::vector<double>(bins, 0.0)};
    for (const auto& p : partial) {
        for (std::size_t k = 0; k <= n; ++k) by_count[k] += p.by_count[k];
        for (std::size_t b = 0; b < bins; ++b) {
            hist.mass[b] += p.mass[b];
            hist.count[b] += p.states[b];
        }
    }
    double z = 0.0;
    for (double w : by_count) z += w;
    stats.concentration_pmf.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        stats.concentration_pmf[k] = by_count[k] / z;
        stats.mean_concentration += static_cast<double>(k) * stats.concentration_pmf[k];
    }
    for (auto& m : hist.mass) m /= z;
    for (std::size_t b = 0; b <= bins; ++b) hist.edges_ev[b] = lo + (hi - lo) * static_cast<double>(b) / bins;
    stats.energy_histogram = std::move(hist);
    stats.log_z = std::log(z) - lo * beta;
    stats.ground_energy_ev = lo;
    stats.ground_state = Configuration::from_mask(ext.argmin, n);
    return stats;
}

BoltzmannStats enumerate_stats(const Lattice& lattice, const EnergyModel& model, ChemicalPotential mu,
                               double temperature_k, const EngineOptions& options) {
    require_enumerable(lattice.size());
    return enumerate_stats(material_hamiltonian(model, lattice, mu), temperature_k, options);
}

BoltzmannStats enumerate_stats(const Layout& layout, const HardwareSpec& spec, double detuning_ev,
                               double temperature_k, SignConvention sign, const EngineOptions& options) {
    require_enumerable(layout.size());
    return enumerate_stats(hardware_hamiltonian(layout, spec, detuning_ev, sign), temperature_k, options);
}

void for_each_configuration(const QuadraticEnergy& energy,
                            const std::function<void(std::uint64_t mask, double energy_ev)>& visit) {
    require_enumerable(energy.size());
    const GrayKernel kernel(energy);
    kernel.run(0, std::uint64_t{1} << energy.size(), visit);
}

CompositionSpectrum composition_spectrum(const QuadraticEnergy& base, std::span<const double> temperatures_k,
                                         const EngineOptions& options) {
    const std::size_t n = base.size();
    require_enumerable(n);
    if (temperatures_k.empty()) throw std::invalid_argument("composition spectrum needs at least one temperature");
    std::vector<double> beta;
    for (double t : temperatures_k) beta.push_back(inverse_thermal_energy(t));
    const double beta_min = *std::min_element(beta.begin(), beta.end());
    const std::size_t nt = beta.size();

    const GrayKernel kernel(base);
    const ChunkPlan plan(n);

    std::vector<std::vector<double>> chunk_min(plan.chunks);
    detail::parallel_tasks(plan.chunks, options.threads, [&](std::size_t c) {
        std::vector<double> m(n + 1, kInf);
        kernel.run(plan.begin(c), plan.end(c), [&](std::uint64_t state, double e) {
            auto& slot = m[static_cast<std::size_t>(std::popcount(state))];
            slot = std::min(slot, e);
        });
        chunk_min[c] = std::move(m);
    });
    std::vector<double> min_k(n + 1, kInf);
    for (const auto& m : chunk_min) {
        for (std::size_t k = 0; k <= n; ++k) min_k[k] = std::min(min_k[k], m[k]);
    }

    std::vector<std::vector<double>> chunk_sums(plan.chunks);
    detail::parallel_tasks(plan.chunks, options.threads, [&](std::size_t c) {
        std::vector<double> s(nt * (n + 1), 0.0);
        kernel.run(plan.begin(c), plan.end(c), [&](std::uint64_t state, double e) {
            const auto k = static_cast<std::size_t>(std::popcount(state));
            const double x = e - min_k[k];
            if (x * beta_min > kUnderflowExponent) return;
            for (std::size_t t = 0; t < nt; ++t) {
                const double a = x * beta[t];
                if (a <= kUnderflowExponent) s[t * (n + 1) + k] += std::exp(-a);
            }
        });
        chunk_sums[c] = std::move(s);
    });

    CompositionSpectrum spec;
    spec.n_sites = n;
    spec.min_energy_ev = min_k;
    spec.temperatures_k.assign(temperatures_k.begin(), temperatures_k.end());
    spec.log_partial.assign(nt, std::vector<double>(n + 1, 0.0));
    for (std::size_t t = 0; t < nt; ++t) {
        for (std::size_t k = 0; k <= n; ++k) {
            double total = 0.0;
            for (const auto& s : chunk_sums) total += s[t * (n + 1) + k];
            spec.log_partial[t][k] = std::log(total);
        }
    }
    return spec;
}

BoltzmannStats CompositionSpectrum::stats(double shift_ev_per_dopant, std::size_t t_index) const {
    if (t_index >= temperatures_k.size()) throw std::out_of_range("temperature index out of range");
    const double beta = inverse_thermal_energy(temperatures_k[t_index]);
    const std::size_t n = n_sites;
    std::vector<double> log_w(n + 1);
    double ground = kInf;
    for (std::size_t k = 0; k <= n; ++k) {
        const double e_k = shift_ev_per_dopant * static_cast<double>(k) + min_energy_ev[k];
        ground = std::min(ground, e_k);
        log_w[k] = -e_k * beta + log_partial[t_index][k];
    }
    const double top = *std::max_element(log_w.begin(), log_w.end());
    double z = 0.0;
    for (double lw : log_w) z += std::exp(lw - top);

    BoltzmannStats stats;
    stats.concentration_pmf.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        stats.concentration_pmf[k] = std::exp(log_w[k] - top) / z;
        stats.mean_concentration += static_cast<double>(k) * stats.concentration_pmf[k];
    }
    stats.log_z = top + std::log(z);
    stats.ground_energy_ev = ground;
    return stats;
}

}  // namespace rydmap
