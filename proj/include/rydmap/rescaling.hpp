#pragma once

#include <utility>

#include "rydmap/energetics.hpp"
#include "rydmap/lattice.hpp"

namespace rydmap {

/// (r_hw / r_model)^6.
double alpha_v(double r_hw_um, double r_model_um);

/// Device detuning realising chemical potential `mu_ev` for on-site energy
/// `v_model_ev` at rescaling `alpha`. Under the drive convention
/// Delta_g = -(V + Delta_mu) / alpha; the printed convention flips the sign.
double detuning_from_mu(double mu_ev, double v_model_ev, double alpha, SignConvention sign = SignConvention::drive);
/// Inverse of detuning_from_mu: Delta_mu = -alpha Delta_g - V (drive convention).
double mu_from_detuning(double detuning_ev, double v_model_ev, double alpha,
                        SignConvention sign = SignConvention::drive);

/// T' = alpha * T.
double effective_temperature(double t_sampling_k, double alpha);

struct MuRange {
    double lo_ev = 0.0;
    double hi_ev = 0.0;
};

/// Chemical potentials reachable with |Delta_g| <= detuning_max: centred on
/// -V with half-width alpha * detuning_max.
MuRange accessible_mu_range(const HardwareSpec& spec, double v_model_ev, double alpha);

/// Material model mapped onto a device spacing. alpha_v is always derived
/// from the two spacings.
class RescaledMapping {
public:
    RescaledMapping(const EnergyModel& model, double r_nn_hw_um, HardwareSpec spec,
                    SignConvention sign = SignConvention::drive);

    double alpha_v() const noexcept { return alpha_; }
    double v_model_ev() const noexcept { return v_model_; }
    /// V / alpha_v.
    double v_scaled_ev() const noexcept { return v_model_ / alpha_; }
    double r_nn_hw_um() const noexcept { return r_hw_; }
    double r_nn_model_um() const noexcept { return r_model_; }
    const HardwareSpec& spec() const noexcept { return spec_; }
    SignConvention sign() const noexcept { return sign_; }

    double detuning_for(double mu_ev) const { return detuning_from_mu(mu_ev, v_model_, alpha_, sign_); }
    double mu_for(double detuning_ev) const { return mu_from_detuning(detuning_ev, v_model_, alpha_, sign_); }
    double effective_temperature(double t_sampling_k) const { return rydmap::effective_temperature(t_sampling_k, alpha_); }
    MuRange mu_range() const { return accessible_mu_range(spec_, v_model_, alpha_); }

private:
    double v_model_;
    double r_hw_;
    double r_model_;
    double alpha_;
    HardwareSpec spec_;
    SignConvention sign_;
};

}  // namespace rydmap
