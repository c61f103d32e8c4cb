#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rydmap/configuration.hpp"
#include "rydmap/lattice.hpp"

namespace rydmap {

/// Sign of the detuning term in the device energy.
///   drive:   E = -Delta_g * |n| + sum C6/R^6 n_i n_j  (positive detuning favours excitation)
///   printed: E = +Delta_g * |n| + sum C6/R^6 n_i n_j
enum class SignConvention { drive, printed };

/// Delta_mu = mu_N - mu_C with mu_C = 0.
struct ChemicalPotential {
    double delta_mu_ev = 0.0;
};

struct ReferenceEnergies {
    std::map<std::string, double> per_species_ev;
};

/// E_total - sum_species N_species * E_species.
double formation_energy(double e_total_ev, const std::map<std::string, int>& counts, const ReferenceEnergies& refs);

/// delta_e_f + n_nitrogen * Delta_mu.
double grand_canonical_energy(double delta_e_f_ev, int n_nitrogen, ChemicalPotential mu);

/// Which pairs the material model sums over.
enum class PairRange {
    four_shells,  // shells 1..4 with factors 1, 1/27, 1/64, 1/343
    untruncated,  // every pair, v_nn / d^6 (non-periodic lattices only)
};

/// Two-parameter Rydberg-form material model: on-site energy plus a
/// nearest-neighbour pair strength decaying as R^-6.
class EnergyModel {
public:
    EnergyModel(double on_site_ev, double v_nn_ev, double c6_ev_um6, PairRange range = PairRange::four_shells);
    static EnergyModel per_site(std::vector<double> on_site_ev, double v_nn_ev, double c6_ev_um6,
                                PairRange range = PairRange::four_shells);
    /// Builds the pair strength from a model nearest-neighbour distance: v_nn = C6 / r^6.
    static EnergyModel from_r_nn(double on_site_ev, double r_nn_model_um, double c6_ev_um6,
                                 PairRange range = PairRange::four_shells);

    bool uniform_on_site() const noexcept { return per_site_.empty(); }
    /// Uniform on-site energy V. Throws for per-site models.
    double on_site() const;
    double on_site(std::size_t site) const;
    const std::vector<double>& per_site_values() const noexcept { return per_site_; }

    double v_nn() const noexcept { return v_nn_; }
    double c6_ev_um6() const noexcept { return c6_; }
    /// (C6 / v_nn)^(1/6).
    double r_nn_model_um() const;
    /// v_nn * shell_factor(shell).
    double pair_strength(int shell) const;
    PairRange range() const noexcept { return range_; }
    EnergyModel with_range(PairRange range) const;

private:
    double on_site_ = 0.0;
    std::vector<double> per_site_;
    double v_nn_ = 0.0;
    double c6_ = 0.0;
    PairRange range_ = PairRange::four_shells;
};

/// E(n) = sum_i h_i n_i + sum_{i<j} J_ij n_i n_j with a dense symmetric J.
/// The common currency of every enumeration and sampling engine.
class QuadraticEnergy {
public:
    QuadraticEnergy() = default;
    explicit QuadraticEnergy(std::size_t n_sites);

    std::size_t size() const noexcept { return n_; }
    double field(std::size_t i) const { return field_.at(i); }
    void set_field(std::size_t i, double value) { field_.at(i) = value; }
    double coupling(std::size_t i, std::size_t j) const { return coupling_.at(i * n_ + j); }
    void add_coupling(std::size_t i, std::size_t j, double value);
    std::span<const double> coupling_row(std::size_t i) const { return {coupling_.data() + i * n_, n_}; }

    double energy(const Configuration& config) const;
    /// Bit i of mask = site i; requires size() <= 64.
    double energy(std::uint64_t mask) const;
    /// Energy change from flipping site i.
    double flip_delta(const Configuration& config, std::size_t i) const;

    /// Copy with `per_site` added to every field entry.
    QuadraticEnergy with_uniform_shift(double per_site) const;

private:
    std::size_t n_ = 0;
    std::vector<double> field_;
    std::vector<double> coupling_;
};

/// Material energy sum_i (V_i + Delta_mu) n_i + pair terms, pairs counted once.
double material_energy(const EnergyModel& model, const Lattice& lattice, const Configuration& config,
                       ChemicalPotential mu);

/// Device energy -/+ Delta_g |n| + sum_{i<j} C6/R_ij^6 n_i n_j over all pairs.
double hardware_energy(const Layout& layout, const HardwareSpec& spec, double detuning_ev,
                       const Configuration& config, SignConvention sign = SignConvention::drive);

QuadraticEnergy material_hamiltonian(const EnergyModel& model, const Lattice& lattice, ChemicalPotential mu);
QuadraticEnergy hardware_hamiltonian(const Layout& layout, const HardwareSpec& spec, double detuning_ev,
                                     SignConvention sign = SignConvention::drive);

/// |E_material - alpha_v E_hardware| / max(|E_material|, 1e-30), alpha_v from the
/// layout spacing and the model's r_nn. Throws if layout is not a scaled copy of lattice.
double scaling_equivalence_residual(const EnergyModel& model, const Lattice& lattice, ChemicalPotential mu,
                                    const Layout& layout, const HardwareSpec& spec, double detuning_ev,
                                    const Configuration& config, SignConvention sign = SignConvention::drive);

/// Upper bound (eV) on the pair energy a four-shell model drops for this
/// configuration: (occupied pairs beyond shell 4) * v_nn / 343.
double truncation_error_bound(const EnergyModel& model, const Lattice& lattice, const Configuration& config);

}  // namespace rydmap
