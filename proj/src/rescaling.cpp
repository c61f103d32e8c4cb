#include "rydmap/rescaling.hpp"

#include <cmath>
#include <stdexcept>

namespace rydmap {

namespace {
void require_positive_alpha(double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha_v must be positive");
}
}  // namespace

double alpha_v(double r_hw_um, double r_model_um) {
    if (!(r_hw_um > 0.0) || !(r_model_um > 0.0)) throw std::invalid_argument("spacings must be positive");
    return std::pow(r_hw_um / r_model_um, 6);
}

double detuning_from_mu(double mu_ev, double v_model_ev, double alpha, SignConvention sign) {
    require_positive_alpha(alpha);
    const double magnitude = (v_model_ev + mu_ev) / alpha;
    return sign == SignConvention::drive ? -magnitude : magnitude;
}

double mu_from_detuning(double detuning_ev, double v_model_ev, double alpha, SignConvention sign) {
    require_positive_alpha(alpha);
    const double signed_detuning = sign == SignConvention::drive ? -detuning_ev : detuning_ev;
    return alpha * signed_detuning - v_model_ev;
}

double effective_temperature(double t_sampling_k, double alpha) {
    if (!(t_sampling_k > 0.0)) throw std::invalid_argument("sampling temperature must be positive");
    require_positive_alpha(alpha);
    return t_sampling_k * alpha;
}

MuRange accessible_mu_range(const HardwareSpec& spec, double v_model_ev, double alpha) {
    require_positive_alpha(alpha);
    const double half = alpha * spec.detuning_max_ev;
    return {-v_model_ev - half, -v_model_ev + half};
}

RescaledMapping::RescaledMapping(const EnergyModel& model, double r_nn_hw_um, HardwareSpec spec, SignConvention sign)
    : v_model_(model.on_site()),
      r_hw_(r_nn_hw_um),
      r_model_(model.r_nn_model_um()),
      alpha_(rydmap::alpha_v(r_nn_hw_um, model.r_nn_model_um())),
      spec_(spec),
      sign_(sign) {}

}  // namespace rydmap
