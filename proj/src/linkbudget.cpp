#include "hqsat/linkbudget.hpp"

#include <cmath>
#include <numbers>

namespace hqsat {

void LinkBudget::validate() const {
    for (double v : {altitude, beam_waist, wavelength, rx_aperture, tx_aperture})
        if (!(v > 0.0)) throw DomainError("link budget lengths must be > 0");
    for (double v : {eta_det, beta_rec})
        if (!(v > 0.0 && v <= 1.0)) throw DomainError("link budget efficiencies must lie in (0, 1]");
    if (!(nu_ele >= 0.0) || !(epsilon_excess >= 0.0)) throw DomainError("noise terms must be >= 0");
}

namespace {

struct BeamFigures {
    double rayleigh_range;
    double beam_radius;
    double tau;
};

BeamFigures beam(const LinkBudget& link) {
    const double zr = std::numbers::pi * link.beam_waist * link.beam_waist / link.wavelength;
    const double ratio = link.altitude / zr;
    const double w = link.beam_waist * std::sqrt(1.0 + ratio * ratio);
    // -expm1 keeps precision when the captured fraction is ~1e-6.
    const double tau = -std::expm1(-2.0 * link.rx_aperture * link.rx_aperture / (w * w));
    return {zr, w, tau};
}

}  // namespace

double far_field_transmissivity(const LinkBudget& link) {
    link.validate();
    return beam(link).tau;
}

EffectiveChannel effective_channel(const LinkBudget& link, const HqnParams& base,
                                   const ChannelConfig& modulation) {
    link.validate();
    base.validate();
    const BeamFigures b = beam(link);
    EffectiveChannel out;
    auto& p = out.provenance;
    p.rayleigh_range = b.rayleigh_range;
    p.beam_radius_rx = b.beam_radius;
    p.tau_fs = b.tau;
    p.tau_total = link.eta_det * b.tau;
    p.t_coeff = std::sqrt(p.tau_total);
    p.sigma_cl_in = base.sigma_cl;
    p.noise_variance_in = base.sigma_cl * base.sigma_cl;
    p.noise_variance_eff = p.noise_variance_in + link.nu_ele + link.epsilon_excess;
    p.sigma_cl_eff = std::sqrt(p.noise_variance_eff);

    out.channel = modulation;
    out.channel.t_coeff = p.t_coeff;
    out.noise = base;
    out.noise.sigma_cl = p.sigma_cl_eff;
    return out;
}

}  // namespace hqsat
