#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rydmap/configuration.hpp"
#include "rydmap/energetics.hpp"
#include "rydmap/lattice.hpp"

namespace rydmap {

/// Largest site count handled by exhaustive enumeration (2^30 configurations).
inline constexpr std::size_t kEnumerationCap = 30;

struct EngineOptions {
    unsigned threads = 0;  // 0 = hardware concurrency
    std::size_t histogram_bins = 64;
};

struct EnergyHistogram {
    std::vector<double> edges_ev;  // bins + 1 edges
    std::vector<double> count;     // configurations (or shots) per bin
    std::vector<double> mass;      // probability mass per bin
};

/// Grand-canonical statistics of the dopant count |n|.
struct BoltzmannStats {
    double mean_concentration = 0.0;        // <|n|>
    std::vector<double> concentration_pmf;  // index k = 0..N
    EnergyHistogram energy_histogram;       // empty when not computed
    double log_z = 0.0;                     // log sum_n exp(-E(n)/kT)
    double ground_energy_ev = 0.0;
    Configuration ground_state;
};

/// Exact statistics over all 2^N configurations at temperature T (K).
/// T = +infinity gives the uniform distribution.
BoltzmannStats enumerate_stats(const QuadraticEnergy& energy, double temperature_k, const EngineOptions& options = {});

/// Material mode: energies of `model` at chemical potential mu, temperature T'.
BoltzmannStats enumerate_stats(const Lattice& lattice, const EnergyModel& model, ChemicalPotential mu,
                               double temperature_k, const EngineOptions& options = {});

/// Hardware mode: device energies of `layout` at detuning Delta_g, temperature T.
BoltzmannStats enumerate_stats(const Layout& layout, const HardwareSpec& spec, double detuning_ev,
                               double temperature_k, SignConvention sign = SignConvention::drive,
                               const EngineOptions& options = {});

/// Calls visit(mask, energy) for every configuration in Gray-code order,
/// energies updated incrementally. Single threaded.
void for_each_configuration(const QuadraticEnergy& energy,
                            const std::function<void(std::uint64_t mask, double energy_ev)>& visit);

/// Per-composition partition sums of a base energy, for many temperatures at
/// once. Any uniform per-dopant shift s (Delta_mu, or -Delta_g) then costs
/// O(N) to evaluate: w_k = exp(-(s k + min_k)/kT) * partial_k.
struct CompositionSpectrum {
    std::size_t n_sites = 0;
    std::vector<double> min_energy_ev;             // min over |n| = k of the base energy
    std::vector<double> temperatures_k;
    std::vector<std::vector<double>> log_partial;  // [t][k] log sum_{|n|=k} exp(-(E - min_k)/kT)

    /// Stats at shift `shift_ev_per_dopant` and temperature index t. The energy
    /// histogram and ground_state are left empty.
    BoltzmannStats stats(double shift_ev_per_dopant, std::size_t t_index) const;
};

CompositionSpectrum composition_spectrum(const QuadraticEnergy& base, std::span<const double> temperatures_k,
                                         const EngineOptions& options = {});

/// Binomial coefficient as a double (exact below 2^53).
double binomial(std::size_t n, std::size_t k);

}  // namespace rydmap
