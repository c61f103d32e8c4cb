#include "rydmap/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "gray_kernel.hpp"
#include "rng.hpp"
#include "rydmap/text_io.hpp"
#include "rydmap/units.hpp"

namespace rydmap {

namespace {

using detail::ChunkPlan;
using detail::GrayKernel;
using detail::kUnderflowExponent;
using detail::Rng;
using detail::Stream;

constexpr double kInf = std::numeric_limits<double>::infinity();

double beta_of(double temperature_k) {
    if (std::isnan(temperature_k) || !(temperature_k > 0.0)) {
        throw std::invalid_argument("temperature must be positive");
    }
    if (std::isinf(temperature_k)) return 0.0;
    return 1.0 / units::thermal_energy_ev(temperature_k);
}

double log_binomial(std::size_t n, std::size_t k) {
    return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

}  // namespace

std::size_t SampleSet::valid_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return r.valid; }));
}

double SampleSet::retained_fraction() const noexcept {
    if (shots_requested == 0) return 0.0;
    return static_cast<double>(valid_count()) / static_cast<double>(shots_requested);
}

SampleSet exact_boltzmann_sample(const QuadraticEnergy& energy, double temperature_k, std::size_t shots,
                                 std::uint64_t seed, const EngineOptions& options) {
    const std::size_t n = energy.size();
    if (n > kExactSampleCap) {
        throw std::invalid_argument("site count over exact sampler cap (" + std::to_string(n) + " > " +
                                    std::to_string(kExactSampleCap) + ")");
    }
    const double beta = beta_of(temperature_k);
    SampleSet set;
    set.shots_requested = shots;
    set.seed = seed;
    set.context = {0.0, temperature_k, "exact"};
    if (shots == 0) return set;

    const GrayKernel kernel(energy);
    const ChunkPlan plan(n);

    std::vector<double> chunk_min(plan.chunks, kInf);
    detail::parallel_tasks(plan.chunks, options.threads, [&](std::size_t c) {
        double m = kInf;
        kernel.run(plan.begin(c), plan.end(c), [&](std::uint64_t, double e) { m = std::min(m, e); });
        chunk_min[c] = m;
    });
    const double e_min = *std::min_element(chunk_min.begin(), chunk_min.end());

    auto weight = [&](double e) {
        const double x = (e - e_min) * beta;
        return x > kUnderflowExponent ? 0.0 : std::exp(-x);
    };

    std::vector<double> chunk_weight(plan.chunks, 0.0);
    detail::parallel_tasks(plan.chunks, options.threads, [&](std::size_t c) {
        double w = 0.0;
        kernel.run(plan.begin(c), plan.end(c), [&](std::uint64_t, double e) { w += weight(e); });
        chunk_weight[c] = w;
    });
    std::vector<double> chunk_start(plan.chunks + 1, 0.0);
    for (std::size_t c = 0; c < plan.chunks; ++c) chunk_start[c + 1] = chunk_start[c] + chunk_weight[c];
    const double total = chunk_start.back();

    // Sorted targets, remembering which shot each belongs to.
    Rng rng(detail::derive_seed(seed, Stream::exact_draws, 0));
    std::vector<std::pair<double, std::size_t>> targets(shots);
    for (std::size_t s = 0; s < shots; ++s) targets[s] = {rng.uniform() * total, s};
    std::sort(targets.begin(), targets.end());

    // Targets [first[c], first[c + 1]) fall in chunk c.
    // The last chunk with weight absorbs targets pushed past the total by rounding.
    std::vector<std::size_t> first(plan.chunks + 1, shots);
    {
        std::size_t last = 0;
        for (std::size_t c = 0; c < plan.chunks; ++c) {
            if (chunk_weight[c] > 0.0) last = c;
        }
        std::size_t t = 0;
        for (std::size_t c = 0; c < plan.chunks; ++c) {
            first[c] = t;
            if (c >= last) {
                t = shots;
            } else {
                while (t < shots && targets[t].first < chunk_start[c + 1]) ++t;
            }
        }
        first[plan.chunks] = shots;
    }

    std::vector<std::uint64_t> drawn(shots, 0);
    detail::parallel_tasks(plan.chunks, options.threads, [&](std::size_t c) {
        std::size_t p = first[c];
        const std::size_t stop = first[c + 1];
        if (p == stop) return;
        double running = 0.0;
        std::uint64_t last_positive = 0;
        kernel.run(plan.begin(c), plan.end(c), [&](std::uint64_t state, double e) {
            if (p == stop) return;
            const double w = weight(e);
            if (w <= 0.0) return;
            running += w;
            last_positive = state;
            while (p < stop && targets[p].first - chunk_start[c] < running) drawn[targets[p++].second] = state;
        });
        // Rounding at the chunk's upper edge.
        while (p < stop) drawn[targets[p++].second] = last_positive;
    });

    set.records.reserve(shots);
    Configuration full(n);
    for (std::size_t i = 0; i < n; ++i) full.set(i);
    for (std::size_t s = 0; s < shots; ++s) set.records.push_back({Configuration::from_mask(drawn[s], n), full, true});
    return set;
}

SampleSet metropolis_sample(const QuadraticEnergy& energy, double temperature_k, std::size_t shots,
                            std::uint64_t seed, const MetropolisOptions& options) {
    const double beta = beta_of(temperature_k);
    const std::size_t n = energy.size();
    const std::size_t sweeps = options.burn_in_sweeps == 0 ? 10 * n : options.burn_in_sweeps;
    SampleSet set;
    set.shots_requested = shots;
    set.seed = seed;
    set.context = {0.0, temperature_k, "metropolis"};
    if (shots == 0) return set;

    Configuration full(n);
    for (std::size_t i = 0; i < n; ++i) full.set(i);
    set.records.assign(shots, ShotRecord{Configuration(n), full, true});

    constexpr std::size_t kShotsPerTask = 16;
    const std::size_t tasks = (shots + kShotsPerTask - 1) / kShotsPerTask;
    detail::parallel_tasks(tasks, options.threads, [&](std::size_t task) {
        std::vector<unsigned char> occ(n);
        std::vector<double> local(n);
        const std::size_t end = std::min(shots, (task + 1) * kShotsPerTask);
        for (std::size_t shot = task * kShotsPerTask; shot < end; ++shot) {
            Rng rng(detail::derive_seed(seed, Stream::metropolis, shot));
            for (std::size_t i = 0; i < n; ++i) occ[i] = rng.uniform() < 0.5 ? 1 : 0;
            for (std::size_t i = 0; i < n; ++i) {
                double h = energy.field(i);
                const auto row = energy.coupling_row(i);
                for (std::size_t j = 0; j < n; ++j) {
                    if (occ[j]) h += row[j];
                }
                local[i] = h;
            }
            if (n > 0) {
                for (std::size_t step = 0; step < sweeps * n; ++step) {
                    const auto i = static_cast<std::size_t>(rng.below(n));
                    const double delta = occ[i] ? -local[i] : local[i];
                    const bool accept = delta <= 0.0 || beta == 0.0 || rng.uniform() < std::exp(-beta * delta);
                    if (!accept) continue;
                    occ[i] ^= 1;
                    const double sign = occ[i] ? 1.0 : -1.0;
                    const auto row = energy.coupling_row(i);
                    for (std::size_t j = 0; j < n; ++j) local[j] += sign * row[j];
                }
            }
            auto& bits = set.records[shot].bits;
            for (std::size_t i = 0; i < n; ++i) {
                if (occ[i]) bits.set(i);
            }
        }
    });
    return set;
}

ThermalBackend parse_backend(std::string_view name) {
    if (name == "auto" || name == "automatic") return ThermalBackend::automatic;
    if (name == "exact") return ThermalBackend::exact;
    if (name == "metropolis") return ThermalBackend::metropolis;
    throw std::invalid_argument("unknown backend '" + std::string(name) + "' (expected exact|metropolis|auto)");
}

SampleSet mock_qpu_run(const Layout& layout, const HardwareSpec& spec, double detuning_ev, double temperature_k,
                       std::size_t shots, std::uint64_t seed, const QpuOptions& options) {
    const auto report = validate_layout(layout, spec);
    if (!report.valid()) throw std::invalid_argument("invalid layout: " + report.violations.front().message);
    const auto& noise = options.noise;
    if (!(noise.p_fill >= 0.0 && noise.p_fill <= 1.0) ||
        !(noise.p_readout_flip >= 0.0 && noise.p_readout_flip <= 1.0)) {
        throw std::invalid_argument("noise probabilities must lie in [0, 1]");
    }
    const std::size_t n = layout.size();
    const QuadraticEnergy q = hardware_hamiltonian(layout, spec, detuning_ev, options.sign);

    std::vector<Configuration> fills;
    fills.reserve(shots);
    std::size_t loaded = 0;
    for (std::size_t s = 0; s < shots; ++s) {
        Rng rng(detail::derive_seed(seed, Stream::fill, s));
        Configuration fill(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (rng.uniform() < noise.p_fill) fill.set(i);
        }
        if (fill.all()) ++loaded;
        fills.push_back(std::move(fill));
    }

    ThermalBackend backend = options.backend;
    if (backend == ThermalBackend::automatic) {
        backend = n <= kExactSampleCap ? ThermalBackend::exact : ThermalBackend::metropolis;
    }
    SampleSet thermal = backend == ThermalBackend::exact
                            ? exact_boltzmann_sample(q, temperature_k, loaded, seed, options.engine)
                            : metropolis_sample(q, temperature_k, loaded, seed, options.metropolis);

    SampleSet set;
    set.shots_requested = shots;
    set.seed = seed;
    set.context = {detuning_ev, temperature_k, thermal.context.backend};
    set.records.reserve(shots);
    std::size_t next = 0;
    for (std::size_t s = 0; s < shots; ++s) {
        if (!fills[s].all()) {
            set.records.push_back({Configuration(n), std::move(fills[s]), false});
            continue;
        }
        Configuration bits = std::move(thermal.records[next++].bits);
        if (noise.p_readout_flip > 0.0) {
            Rng rng(detail::derive_seed(seed, Stream::readout, s));
            for (std::size_t i = 0; i < n; ++i) {
                if (rng.uniform() < noise.p_readout_flip) bits.flip(i);
            }
        }
        set.records.push_back({std::move(bits), std::move(fills[s]), true});
    }
    return set;
}

double qpu_mean_concentration(const SampleSet& samples) {
    double sum = 0.0;
    std::size_t valid = 0;
    for (const auto& r : samples.records) {
        if (!r.valid) continue;
        sum += static_cast<double>(r.bits.count());
        ++valid;
    }
    if (valid == 0) throw std::invalid_argument("no valid records");
    return sum / static_cast<double>(valid);
}

std::vector<double> concentration_pmf(const SampleSet& samples) {
    std::size_t n = 0;
    for (const auto& r : samples.records) n = std::max(n, r.bits.size());
    std::vector<double> pmf(n + 1, 0.0);
    std::size_t valid = 0;
    for (const auto& r : samples.records) {
        if (!r.valid) continue;
        pmf[r.bits.count()] += 1.0;
        ++valid;
    }
    if (valid == 0) throw std::invalid_argument("no valid records");
    for (auto& p : pmf) p /= static_cast<double>(valid);
    return pmf;
}

EnergyHistogram energy_histogram(const SampleSet& samples, const QuadraticEnergy& energy,
                                 std::span<const double> edges_ev) {
    if (edges_ev.size() < 2) throw std::invalid_argument("histogram needs at least one bin");
    if (!std::is_sorted(edges_ev.begin(), edges_ev.end())) throw std::invalid_argument("histogram edges must be sorted");
    const std::size_t bins = edges_ev.size() - 1;
    EnergyHistogram hist{std::vector<double>(edges_ev.begin(), edges_ev.end()), std::vector<double>(bins, 0.0),
                         std::vector<double>(bins, 0.0)};
    std::size_t valid = 0;
    for (const auto& r : samples.records) {
        if (!r.valid) continue;
        ++valid;
        const double e = energy.energy(r.bits);
        if (e < edges_ev.front() || e > edges_ev.back()) continue;
        auto it = std::upper_bound(edges_ev.begin(), edges_ev.end(), e);
        auto bin = static_cast<std::size_t>(it - edges_ev.begin());
        bin = bin == 0 ? 0 : std::min(bins, bin) - 1;
        hist.count[bin] += 1.0;
    }
    for (std::size_t b = 0; b < bins; ++b) hist.mass[b] = valid ? hist.count[b] / static_cast<double>(valid) : 0.0;
    return hist;
}

EnergyHistogram energy_histogram(const SampleSet& samples, const QuadraticEnergy& energy, std::size_t bins) {
    if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
    double lo = kInf;
    double hi = -kInf;
    for (const auto& r : samples.records) {
        if (!r.valid) continue;
        const double e = energy.energy(r.bits);
        lo = std::min(lo, e);
        hi = std::max(hi, e);
    }
    if (lo > hi) {
        lo = 0.0;
        hi = 1.0;
    } else if (!(hi > lo)) {
        hi = lo + std::max(std::abs(lo) * 1e-12, 1e-30);
    }
    std::vector<double> edges(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) edges[b] = lo + (hi - lo) * static_cast<double>(b) / bins;
    edges.back() = hi;
    return energy_histogram(samples, energy, edges);
}

Proposal Proposal::parse(std::string_view text) {
    if (text == "uniform-bits") return {Kind::uniform_bits, 0, 0};
    constexpr std::string_view prefix = "stratified";
    if (text.substr(0, prefix.size()) != prefix) {
        throw std::invalid_argument("unknown proposal '" + std::string(text) + "'");
    }
    auto rest = text.substr(prefix.size());
    if (rest.empty()) return {};
    const auto dash = rest.find('-');
    if (rest.front() != ':' || dash == std::string_view::npos) {
        throw std::invalid_argument("proposal must look like stratified:KMIN-KMAX");
    }
    const auto lo = text::parse_int(rest.substr(1, dash - 1), "proposal k_min");
    const auto hi = text::parse_int(rest.substr(dash + 1), "proposal k_max");
    if (lo < 0 || hi < lo) throw std::invalid_argument("proposal range must satisfy 0 <= k_min <= k_max");
    return {Kind::stratified, static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

std::string Proposal::to_string() const {
    if (kind == Kind::uniform_bits) return "uniform-bits";
    return "stratified:" + std::to_string(k_min) + "-" + std::to_string(k_max);
}

McEstimate uniform_mc_stats(const QuadraticEnergy& energy, double temperature_k, std::size_t n_samples,
                            std::uint64_t seed, const Proposal& proposal, unsigned threads) {
    if (n_samples == 0) throw std::invalid_argument("n_samples must be at least 1");
    const double beta = beta_of(temperature_k);
    const std::size_t n = energy.size();
    const bool stratified = proposal.kind == Proposal::Kind::stratified;
    const std::size_t k_lo = stratified ? proposal.k_min : 0;
    const std::size_t k_hi = stratified ? std::min(proposal.k_max, n) : n;
    if (stratified && k_lo > k_hi) throw std::invalid_argument("proposal range is empty for this lattice");
    const std::size_t k_span = k_hi - k_lo + 1;

    std::vector<double> log_q(n + 1, -static_cast<double>(n) * std::log(2.0));
    if (stratified) {
        for (std::size_t k = k_lo; k <= k_hi; ++k) {
            log_q[k] = -std::log(static_cast<double>(k_span)) - log_binomial(n, k);
        }
    }

    constexpr std::size_t kBlock = 4096;
    const std::size_t blocks = (n_samples + kBlock - 1) / kBlock;

    // Regenerates block b's samples identically on every call.
    auto run_block = [&](std::size_t b, auto&& visit) {
        Rng rng(detail::derive_seed(seed, Stream::umc, b));
        std::vector<std::size_t> pool(n);
        std::vector<std::size_t> occupied;
        occupied.reserve(n);
        const std::size_t count = std::min(kBlock, n_samples - b * kBlock);
        for (std::size_t s = 0; s < count; ++s) {
            occupied.clear();
            if (stratified) {
                const std::size_t k = k_lo + static_cast<std::size_t>(rng.below(k_span));
                std::iota(pool.begin(), pool.end(), std::size_t{0});
                for (std::size_t t = 0; t < k; ++t) {
                    const auto pick = t + static_cast<std::size_t>(rng.below(n - t));
                    std::swap(pool[t], pool[pick]);
                    occupied.push_back(pool[t]);
                }
            } else {
                std::uint64_t word = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (i % 64 == 0) word = rng.next();
                    if ((word >> (i % 64)) & 1u) occupied.push_back(i);
                }
            }
            double e = 0.0;
            for (std::size_t a = 0; a < occupied.size(); ++a) {
                e += energy.field(occupied[a]);
                for (std::size_t c = 0; c < a; ++c) e += energy.coupling(occupied[a], occupied[c]);
            }
            const std::size_t k = occupied.size();
            visit(occupied, k, e, -beta * e - log_q[k]);
        }
    };

    std::vector<double> block_max(blocks, -kInf);
    detail::parallel_tasks(blocks, threads, [&](std::size_t b) {
        double m = -kInf;
        run_block(b, [&](const auto&, std::size_t, double, double lw) { m = std::max(m, lw); });
        block_max[b] = m;
    });
    const double top = *std::max_element(block_max.begin(), block_max.end());

    struct Sums {
        double w = 0, w2 = 0, wk = 0, w2k = 0, w2k2 = 0;
        std::vector<double> by_count;
        double e_min = kInf;
        std::vector<std::size_t> argmin;
    };
    std::vector<Sums> partial(blocks);
    detail::parallel_tasks(blocks, threads, [&](std::size_t b) {
        Sums s;
        s.by_count.assign(n + 1, 0.0);
        run_block(b, [&](const std::vector<std::size_t>& occ, std::size_t k, double e, double lw) {
            const double w = std::exp(lw - top);
            const double kd = static_cast<double>(k);
            s.w += w;
            s.w2 += w * w;
            s.wk += w * kd;
            s.w2k += w * w * kd;
            s.w2k2 += w * w * kd * kd;
            s.by_count[k] += w;
            if (e < s.e_min) {
                s.e_min = e;
                s.argmin = occ;
            }
        });
        partial[b] = std::move(s);
    });

    Sums total;
    total.by_count.assign(n + 1, 0.0);
    for (const auto& s : partial) {
        total.w += s.w;
        total.w2 += s.w2;
        total.wk += s.wk;
        total.w2k += s.w2k;
        total.w2k2 += s.w2k2;
        for (std::size_t k = 0; k <= n; ++k) total.by_count[k] += s.by_count[k];
        if (s.e_min < total.e_min) {
            total.e_min = s.e_min;
            total.argmin = s.argmin;
        }
    }

    McEstimate est;
    est.n_samples = n_samples;
    auto& st = est.stats;
    st.concentration_pmf.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) st.concentration_pmf[k] = total.by_count[k] / total.w;
    st.mean_concentration = total.wk / total.w;
    st.log_z = top + std::log(total.w / static_cast<double>(n_samples));
    st.ground_energy_ev = total.e_min;
    st.ground_state = Configuration::from_sites(total.argmin, n);
    est.ess = total.w * total.w / total.w2;
    const double m = st.mean_concentration;
    const double spread = total.w2k2 - 2.0 * m * total.w2k + m * m * total.w2;
    est.std_error = std::sqrt(std::max(0.0, spread)) / total.w;
    return est;
}

double tvd(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("pmf support lengths differ");
    auto check = [](std::span<const double> x, const char* name) {
        double s = 0.0;
        for (double v : x) {
            if (!(v >= 0.0)) throw std::invalid_argument(std::string(name) + " has a negative or NaN entry");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-6) throw std::invalid_argument(std::string(name) + " does not sum to 1");
    };
    check(p, "first pmf");
    check(q, "second pmf");
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) d += std::abs(p[i] - q[i]);
    return 0.5 * d;
}

namespace {

double hardware_shift(double detuning_ev, SignConvention sign) {
    return sign == SignConvention::drive ? -detuning_ev : detuning_ev;
}

SweepPoint point_from_stats(double detuning, double mu, const BoltzmannStats& stats) {
    return {detuning, mu, stats.mean_concentration, stats.concentration_pmf, stats.log_z};
}

}  // namespace

SweepResult sweep_hardware_exact(const Layout& layout, const RescaledMapping& mapping,
                                 std::span<const double> detunings_ev, double temperature_k,
                                 const EngineOptions& options) {
    if (detunings_ev.empty()) throw std::invalid_argument("sweep grid is empty");
    const QuadraticEnergy base = hardware_hamiltonian(layout, mapping.spec(), 0.0, mapping.sign());
    const double temps[] = {temperature_k};
    const auto spectrum = composition_spectrum(base, temps, options);
    SweepResult result;
    for (double dg : detunings_ev) {
        result.points.push_back(
            point_from_stats(dg, mapping.mu_for(dg), spectrum.stats(hardware_shift(dg, mapping.sign()), 0)));
    }
    return result;
}

SweepResult sweep_material_exact(const Lattice& lattice, const EnergyModel& model, const RescaledMapping& mapping,
                                 std::span<const double> delta_mu_ev, double temperature_k,
                                 const EngineOptions& options) {
    if (delta_mu_ev.empty()) throw std::invalid_argument("sweep grid is empty");
    const QuadraticEnergy base = material_hamiltonian(model, lattice, ChemicalPotential{0.0});
    const double temps[] = {temperature_k};
    const auto spectrum = composition_spectrum(base, temps, options);
    SweepResult result;
    for (double mu : delta_mu_ev) {
        result.points.push_back(point_from_stats(mapping.detuning_for(mu), mu, spectrum.stats(mu, 0)));
    }
    return result;
}

SweepPoint sweep_point_from_samples(const SampleSet& samples, const RescaledMapping& mapping) {
    const double dg = samples.context.detuning_ev;
    return {dg, mapping.mu_for(dg), qpu_mean_concentration(samples), concentration_pmf(samples), std::nullopt};
}

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
    std::vector<double> grid(n);
    if (n == 0) return grid;
    if (n == 1) {
        grid[0] = lo;
        return grid;
    }
    for (std::size_t i = 0; i < n; ++i) grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    grid.back() = hi;
    return grid;
}

std::vector<double> default_temperature_grid() {
    std::vector<double> grid(60);
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = static_cast<double>(i + 1) * 1e-6;
    return grid;
}

TemperatureFit fit_effective_temperature(const SweepResult& measured, const Layout& layout,
                                         const HardwareSpec& spec, std::span<const double> t_grid_k,
                                         SignConvention sign, const EngineOptions& options) {
    if (measured.points.size() < 2) throw std::invalid_argument("temperature fit needs at least 2 measured points");
    if (t_grid_k.empty()) throw std::invalid_argument("temperature grid is empty");
    const std::size_t n = layout.size();
    if (n == 0) throw std::invalid_argument("layout has no sites");
    const QuadraticEnergy base = hardware_hamiltonian(layout, spec, 0.0, sign);
    const auto spectrum = composition_spectrum(base, t_grid_k, options);
    const double nd = static_cast<double>(n);

    TemperatureFit fit;
    fit.temperatures_k.assign(t_grid_k.begin(), t_grid_k.end());
    fit.rmse.resize(t_grid_k.size());
    std::size_t best = 0;
    for (std::size_t t = 0; t < t_grid_k.size(); ++t) {
        double sq = 0.0;
        for (const auto& p : measured.points) {
            const double model = spectrum.stats(hardware_shift(p.detuning_ev, sign), t).mean_concentration;
            const double diff = (model - p.mean_concentration) / nd;
            sq += diff * diff;
        }
        fit.rmse[t] = std::sqrt(sq / static_cast<double>(measured.points.size()));
        const bool better = fit.rmse[t] < fit.rmse[best] ||
                            (fit.rmse[t] == fit.rmse[best] && t_grid_k[t] < t_grid_k[best]);
        if (t == 0 || better) best = t;
    }
    fit.t_star_k = t_grid_k[best];
    fit.rmse_at_optimum = fit.rmse[best];
    return fit;
}

void write_jsonl(std::ostream& out, const SampleSet& samples) {
    for (const auto& r : samples.records) {
        const nlohmann::json rec = {{"bits", r.bits.to_bitstring()}, {"fill", r.fill.to_bitstring()}, {"valid", r.valid}};
        out << rec.dump() << '\n';
    }
}

SampleSet read_jsonl(std::istream& in) {
    SampleSet set;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            const auto rec = nlohmann::json::parse(line);
            ShotRecord r{Configuration::from_bitstring(rec.at("bits").get<std::string>()),
                         Configuration::from_bitstring(rec.at("fill").get<std::string>()), rec.at("valid").get<bool>()};
            if (r.bits.size() != r.fill.size()) throw std::invalid_argument("bits and fill lengths differ");
            if (r.valid != r.fill.all()) throw std::invalid_argument("valid flag disagrees with fill mask");
            if (!set.records.empty() && set.records.front().bits.size() != r.bits.size()) {
                throw std::invalid_argument("record length differs from earlier records");
            }
            set.records.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    set.shots_requested = set.records.size();
    return set;
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
    out << kSweepCsvHeader << '\n';
    for (const auto& p : sweep.points) {
        out << text::format_double(p.detuning_ev) << ',' << text::format_double(p.delta_mu_ev) << ','
            << text::format_double(p.mean_concentration) << ','
            << text::csv_field(text::format_list(p.concentration_pmf)) << ','
            << (p.log_z ? text::format_double(*p.log_z) : std::string()) << '\n';
    }
}

SweepResult read_sweep_csv(std::istream& in) {
    SweepResult sweep;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        if (!header) {
            if (text::trim(line) != kSweepCsvHeader) {
                throw std::invalid_argument("line " + std::to_string(line_no) + ": expected header '" +
                                            std::string(kSweepCsvHeader) + "'");
            }
            header = true;
            continue;
        }
        try {
            const auto f = text::split_csv(line);
            if (f.size() != 5) throw std::invalid_argument("expected 5 fields, got " + std::to_string(f.size()));
            SweepPoint p;
            p.detuning_ev = text::parse_double(f[0], "delta_g_ev");
            p.delta_mu_ev = text::parse_double(f[1], "delta_mu_ev");
            p.mean_concentration = text::parse_double(f[2], "mean_conc");
            if (!text::trim(f[3]).empty()) p.concentration_pmf = nlohmann::json::parse(f[3]).get<std::vector<double>>();
            if (!text::trim(f[4]).empty()) p.log_z = text::parse_double(f[4], "log_z");
            sweep.points.push_back(std::move(p));
        } catch (const std::exception& e) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!header) throw std::invalid_argument("sweep file is empty");
    return sweep;
}

}  // namespace rydmap
