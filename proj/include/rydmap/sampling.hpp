#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rydmap/configuration.hpp"
#include "rydmap/energetics.hpp"
#include "rydmap/enumeration.hpp"
#include "rydmap/lattice.hpp"
#include "rydmap/rescaling.hpp"

namespace rydmap {

/// Largest site count the exact sampler accepts.
inline constexpr std::size_t kExactSampleCap = 28;

struct ShotRecord {
    Configuration bits;  // measured occupations (all zero for invalid shots)
    Configuration fill;  // sites that held an atom
    bool valid = false;  // fill is all ones
};

struct SampleContext {
    double detuning_ev = 0.0;
    double temperature_k = 0.0;
    std::string backend;
};

struct SampleSet {
    std::vector<ShotRecord> records;
    std::size_t shots_requested = 0;
    std::uint64_t seed = 0;
    SampleContext context;

    std::size_t valid_count() const noexcept;
    /// valid_count / shots_requested; 0 when no shots were requested.
    double retained_fraction() const noexcept;
};

/// i.i.d. draws from the exact Boltzmann distribution of `energy` at T, by
/// streaming inverse CDF over the Gray-code enumeration. Every record is valid.
SampleSet exact_boltzmann_sample(const QuadraticEnergy& energy, double temperature_k, std::size_t shots,
                                 std::uint64_t seed, const EngineOptions& options = {});

struct MetropolisOptions {
    /// Full sweeps (N attempted flips each) before the shot is read; 0 = 10 N.
    std::size_t burn_in_sweeps = 0;
    unsigned threads = 0;
};

/// One independent single-flip Metropolis chain per shot from a uniform random start.
SampleSet metropolis_sample(const QuadraticEnergy& energy, double temperature_k, std::size_t shots,
                            std::uint64_t seed, const MetropolisOptions& options = {});

struct NoiseModel {
    /// Per-site loading probability; 0.9822^28 ~ 0.605 retained shots on 28 sites.
    double p_fill = 0.9822;
    double p_readout_flip = 0.0;
};

enum class ThermalBackend { automatic, exact, metropolis };

ThermalBackend parse_backend(std::string_view name);

struct QpuOptions {
    NoiseModel noise;
    ThermalBackend backend = ThermalBackend::automatic;  // exact when N <= 28
    SignConvention sign = SignConvention::drive;
    MetropolisOptions metropolis;
    EngineOptions engine;
};

/// Simulated device run: occupancy noise, thermal sampling of fully loaded
/// shots, readout flips. Throws std::invalid_argument for an invalid layout.
SampleSet mock_qpu_run(const Layout& layout, const HardwareSpec& spec, double detuning_ev, double temperature_k,
                       std::size_t shots, std::uint64_t seed, const QpuOptions& options = {});

/// Mean Hamming weight over valid records. Throws when none are valid.
double qpu_mean_concentration(const SampleSet& samples);
/// Empirical pmf of the Hamming weight over valid records, index 0..N.
std::vector<double> concentration_pmf(const SampleSet& samples);

/// Energy histogram of the valid records with `bins` equal bins over their energy range.
EnergyHistogram energy_histogram(const SampleSet& samples, const QuadraticEnergy& energy, std::size_t bins);
/// Same, on caller-supplied bin edges; records outside the edges are dropped.
EnergyHistogram energy_histogram(const SampleSet& samples, const QuadraticEnergy& energy,
                                 std::span<const double> edges_ev);

/// Proposal distribution of the uniform Monte Carlo estimator.
struct Proposal {
    enum class Kind { uniform_bits, stratified };
    Kind kind = Kind::stratified;
    std::size_t k_min = 0;
    std::size_t k_max = 10;

    /// "uniform-bits" or "stratified:KMIN-KMAX".
    static Proposal parse(std::string_view text);
    std::string to_string() const;
};

struct McEstimate {
    BoltzmannStats stats;  // pmf, mean, log_z estimate, lowest sampled energy
    double ess = 0.0;        // (sum w)^2 / sum w^2
    double std_error = 0.0;  // delta-method standard error of the mean concentration
    std::size_t n_samples = 0;
};

/// Self-normalised importance estimate of the Boltzmann statistics from
/// random configurations. For the stratified proposal the count k is uniform
/// over [k_min, min(k_max, N)] and the sites uniform given k; weights carry
/// the proposal density so the estimate targets the full grand-canonical
/// ensemble restricted to that composition window.
McEstimate uniform_mc_stats(const QuadraticEnergy& energy, double temperature_k, std::size_t n_samples,
                            std::uint64_t seed, const Proposal& proposal = {}, unsigned threads = 0);

/// Half the L1 distance. Throws on length mismatch or when either input is
/// not normalised within 1e-6.
double tvd(std::span<const double> p, std::span<const double> q);

struct SweepPoint {
    double detuning_ev = 0.0;
    double delta_mu_ev = 0.0;
    double mean_concentration = 0.0;
    std::vector<double> concentration_pmf;
    std::optional<double> log_z;  // exact engines only
};

struct SweepResult {
    std::vector<SweepPoint> points;
};

/// Exact hardware-mode sweep at device temperature T over the given detunings.
/// Delta_mu is filled through `mapping`.
SweepResult sweep_hardware_exact(const Layout& layout, const RescaledMapping& mapping,
                                 std::span<const double> detunings_ev, double temperature_k,
                                 const EngineOptions& options = {});

/// Exact material-mode sweep at effective temperature T' over the given
/// chemical potentials. Delta_g is filled through `mapping`.
SweepResult sweep_material_exact(const Lattice& lattice, const EnergyModel& model, const RescaledMapping& mapping,
                                 std::span<const double> delta_mu_ev, double temperature_k,
                                 const EngineOptions& options = {});

/// Sweep from sampled shots: mean and pmf over valid records of each set.
SweepPoint sweep_point_from_samples(const SampleSet& samples, const RescaledMapping& mapping);

/// n evenly spaced values from lo to hi inclusive (n = 1 gives lo).
std::vector<double> linear_grid(double lo, double hi, std::size_t n);

/// Sixty temperatures 1, 2, ..., 60 uK.
std::vector<double> default_temperature_grid();

struct TemperatureFit {
    double t_star_k = 0.0;
    double rmse_at_optimum = 0.0;
    std::vector<double> temperatures_k;
    std::vector<double> rmse;  // per grid temperature
};

/// Grid search for the device temperature whose exact mean-concentration
/// curve best matches `measured` (RMSE of the fractional concentration
/// <|n|>/N over the measured detunings). Ties go to the lower temperature.
TemperatureFit fit_effective_temperature(const SweepResult& measured, const Layout& layout,
                                         const HardwareSpec& spec, std::span<const double> t_grid_k,
                                         SignConvention sign = SignConvention::drive,
                                         const EngineOptions& options = {});

// Serialisation.
void write_jsonl(std::ostream& out, const SampleSet& samples);
/// Reads records of the form {"bits":"0101","fill":"1111","valid":true}.
SampleSet read_jsonl(std::istream& in);

inline constexpr std::string_view kSweepCsvHeader = "delta_g_ev,delta_mu_ev,mean_conc,conc_pmf_json,log_z";
void write_sweep_csv(std::ostream& out, const SweepResult& sweep);
SweepResult read_sweep_csv(std::istream& in);

}  // namespace rydmap
