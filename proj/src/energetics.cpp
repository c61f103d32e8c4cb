#include "rydmap/energetics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace rydmap {

double formation_energy(double e_total_ev, const std::map<std::string, int>& counts, const ReferenceEnergies& refs) {
    double e = e_total_ev;
    for (const auto& [species, n] : counts) {
        const auto it = refs.per_species_ev.find(species);
        if (it == refs.per_species_ev.end()) {
            throw std::invalid_argument("no reference energy for species '" + species + "'");
        }
        e -= n * it->second;
    }
    return e;
}

double grand_canonical_energy(double delta_e_f_ev, int n_nitrogen, ChemicalPotential mu) {
    if (n_nitrogen < 0) throw std::invalid_argument("nitrogen count must be non-negative");
    return delta_e_f_ev + n_nitrogen * mu.delta_mu_ev;
}

EnergyModel::EnergyModel(double on_site_ev, double v_nn_ev, double c6_ev_um6, PairRange range)
    : on_site_(on_site_ev), v_nn_(v_nn_ev), c6_(c6_ev_um6), range_(range) {
    if (!(v_nn_ev > 0.0)) throw std::invalid_argument("pair strength v_nn must be positive");
    if (!(c6_ev_um6 > 0.0)) throw std::invalid_argument("C6 must be positive");
}

EnergyModel EnergyModel::per_site(std::vector<double> on_site_ev, double v_nn_ev, double c6_ev_um6, PairRange range) {
    EnergyModel m(0.0, v_nn_ev, c6_ev_um6, range);
    m.per_site_ = std::move(on_site_ev);
    return m;
}

EnergyModel EnergyModel::from_r_nn(double on_site_ev, double r_nn_model_um, double c6_ev_um6, PairRange range) {
    if (!(r_nn_model_um > 0.0)) throw std::invalid_argument("model r_nn must be positive");
    return EnergyModel(on_site_ev, c6_ev_um6 / std::pow(r_nn_model_um, 6), c6_ev_um6, range);
}

double EnergyModel::on_site() const {
    if (!uniform_on_site()) throw std::logic_error("model has per-site on-site energies");
    return on_site_;
}

double EnergyModel::on_site(std::size_t site) const {
    if (uniform_on_site()) return on_site_;
    return per_site_.at(site);
}

double EnergyModel::r_nn_model_um() const { return std::pow(c6_ / v_nn_, 1.0 / 6.0); }

double EnergyModel::pair_strength(int shell) const { return v_nn_ * shell_factor(shell); }

EnergyModel EnergyModel::with_range(PairRange range) const {
    EnergyModel m = *this;
    m.range_ = range;
    return m;
}

QuadraticEnergy::QuadraticEnergy(std::size_t n_sites)
    : n_(n_sites), field_(n_sites, 0.0), coupling_(n_sites * n_sites, 0.0) {}

void QuadraticEnergy::add_coupling(std::size_t i, std::size_t j, double value) {
    if (i >= n_ || j >= n_) throw std::out_of_range("coupling index out of range");
    if (i == j) throw std::invalid_argument("diagonal couplings are on-site fields");
    coupling_[i * n_ + j] += value;
    coupling_[j * n_ + i] += value;
}

double QuadraticEnergy::energy(const Configuration& config) const {
    if (config.size() != n_) throw std::invalid_argument("configuration length does not match Hamiltonian");
    const auto occ = config.occupied();
    double e = 0.0;
    for (std::size_t a = 0; a < occ.size(); ++a) {
        const std::size_t i = occ[a];
        e += field_[i];
        const double* row = coupling_.data() + i * n_;
        for (std::size_t b = a + 1; b < occ.size(); ++b) e += row[occ[b]];
    }
    return e;
}

double QuadraticEnergy::energy(std::uint64_t mask) const {
    if (n_ > 64) throw std::logic_error("mask energy requires at most 64 sites");
    double e = 0.0;
    std::uint64_t rest = mask;
    while (rest) {
        const auto i = static_cast<std::size_t>(std::countr_zero(rest));
        rest &= rest - 1;
        e += field_[i];
        const double* row = coupling_.data() + i * n_;
        std::uint64_t later = rest;
        while (later) {
            e += row[std::countr_zero(later)];
            later &= later - 1;
        }
    }
    return e;
}

double QuadraticEnergy::flip_delta(const Configuration& config, std::size_t i) const {
    double local = field_.at(i);
    const double* row = coupling_.data() + i * n_;
    for (auto j : config.occupied()) {
        if (j != i) local += row[j];
    }
    return config.test(i) ? -local : local;
}

QuadraticEnergy QuadraticEnergy::with_uniform_shift(double per_site) const {
    QuadraticEnergy out = *this;
    for (auto& h : out.field_) h += per_site;
    return out;
}

namespace {

void require_length(const Configuration& config, std::size_t n) {
    if (config.size() != n) throw std::invalid_argument("configuration length does not match lattice size");
}

void require_on_site_length(const EnergyModel& model, std::size_t n) {
    if (!model.uniform_on_site() && model.per_site_values().size() != n) {
        throw std::invalid_argument("per-site on-site vector does not match lattice size");
    }
}

double detuning_sign(SignConvention sign) { return sign == SignConvention::drive ? -1.0 : 1.0; }

}  // namespace

double material_energy(const EnergyModel& model, const Lattice& lattice, const Configuration& config,
                       ChemicalPotential mu) {
    require_length(config, lattice.size());
    require_on_site_length(model, lattice.size());
    double e = 0.0;
    for (auto i : config.occupied()) e += model.on_site(i) + mu.delta_mu_ev;

    if (model.range() == PairRange::untruncated) {
        if (lattice.periodic()) throw std::invalid_argument("untruncated pair sums need a non-periodic lattice");
        const auto occ = config.occupied();
        for (std::size_t a = 0; a < occ.size(); ++a) {
            for (std::size_t b = a + 1; b < occ.size(); ++b) {
                e += model.v_nn() / std::pow(lattice.distance(occ[a], occ[b]), 6);
            }
        }
        return e;
    }
    for (int s = 1; s <= kShellCount; ++s) {
        const double strength = model.pair_strength(s);
        for (const auto& p : lattice.shell_pairs(s)) {
            if (config.test(p.i) && config.test(p.j)) e += strength * p.multiplicity;
        }
    }
    return e;
}

double hardware_energy(const Layout& layout, const HardwareSpec& spec, double detuning_ev,
                       const Configuration& config, SignConvention sign) {
    require_length(config, layout.size());
    const double c6 = spec.c6_ev_um6();
    const auto occ = config.occupied();
    double e = detuning_sign(sign) * detuning_ev * static_cast<double>(occ.size());
    for (std::size_t a = 0; a < occ.size(); ++a) {
        for (std::size_t b = a + 1; b < occ.size(); ++b) {
            e += c6 / std::pow(layout.distance_um(occ[a], occ[b]), 6);
        }
    }
    return e;
}

QuadraticEnergy material_hamiltonian(const EnergyModel& model, const Lattice& lattice, ChemicalPotential mu) {
    require_on_site_length(model, lattice.size());
    QuadraticEnergy q(lattice.size());
    for (std::size_t i = 0; i < lattice.size(); ++i) q.set_field(i, model.on_site(i) + mu.delta_mu_ev);
    if (model.range() == PairRange::untruncated) {
        if (lattice.periodic()) throw std::invalid_argument("untruncated pair sums need a non-periodic lattice");
        for (std::size_t i = 0; i < lattice.size(); ++i) {
            for (std::size_t j = i + 1; j < lattice.size(); ++j) {
                q.add_coupling(i, j, model.v_nn() / std::pow(lattice.distance(i, j), 6));
            }
        }
        return q;
    }
    for (int s = 1; s <= kShellCount; ++s) {
        const double strength = model.pair_strength(s);
        for (const auto& p : lattice.shell_pairs(s)) q.add_coupling(p.i, p.j, strength * p.multiplicity);
    }
    return q;
}

QuadraticEnergy hardware_hamiltonian(const Layout& layout, const HardwareSpec& spec, double detuning_ev,
                                     SignConvention sign) {
    const std::size_t n = layout.size();
    const double c6 = spec.c6_ev_um6();
    QuadraticEnergy q(n);
    for (std::size_t i = 0; i < n; ++i) q.set_field(i, detuning_sign(sign) * detuning_ev);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) q.add_coupling(i, j, c6 / std::pow(layout.distance_um(i, j), 6));
    }
    return q;
}

double scaling_equivalence_residual(const EnergyModel& model, const Lattice& lattice, ChemicalPotential mu,
                                    const Layout& layout, const HardwareSpec& spec, double detuning_ev,
                                    const Configuration& config, SignConvention sign) {
    if (layout.size() != lattice.size()) throw std::invalid_argument("layout and lattice differ in site count");
    for (std::size_t i = 0; i < lattice.size(); ++i) {
        const auto& f = lattice.site(i).frac_pos;
        const auto& p = layout.positions_um[i];
        if (std::abs(f[0] * layout.r_nn_um - p[0]) > 1e-9 || std::abs(f[1] * layout.r_nn_um - p[1]) > 1e-9) {
            throw std::invalid_argument("layout is not the lattice scaled by its r_nn");
        }
    }
    const double alpha = std::pow(layout.r_nn_um / model.r_nn_model_um(), 6);
    const double e_mat = material_energy(model, lattice, config, mu);
    const double e_hw = hardware_energy(layout, spec, detuning_ev, config, sign);
    return std::abs(e_mat - alpha * e_hw) / std::max(std::abs(e_mat), 1e-30);
}

double truncation_error_bound(const EnergyModel& model, const Lattice& lattice, const Configuration& config) {
    require_length(config, lattice.size());
    if (lattice.periodic()) return 0.0;
    const auto occ = config.occupied();
    std::size_t beyond = 0;
    for (std::size_t a = 0; a < occ.size(); ++a) {
        for (std::size_t b = a + 1; b < occ.size(); ++b) {
            if (classify_distance(lattice.distance(occ[a], occ[b])) == 0) ++beyond;
        }
    }
    return static_cast<double>(beyond) * model.v_nn() / 343.0;
}

}  // namespace rydmap
