#pragma once

// Satellite optical link parameters reduced to an effective channel:
// Gaussian-beam diffraction loss, detector efficiency, and the electronic
// and excess noise folded into the classical noise variance.

#include "hqsat/noise_model.hpp"

namespace hqsat {

struct LinkBudget {
    double altitude = 2.0e7;       ///< link distance, m
    double beam_waist = 0.05;      ///< w0, m
    double wavelength = 800e-9;    ///< m
    double rx_aperture = 0.15;     ///< receiver aperture radius, m
    double tx_aperture = 0.05;     ///< transmitter aperture radius, m
    double eta_det = 0.606;
    double nu_ele = 0.041;         ///< electronic noise variance, shot-noise units
    double epsilon_excess = 0.005; ///< excess noise, shot-noise units
    double beta_rec = 0.95;
    // Recorded for provenance only; nothing consumes them.
    double pulse_width = 3e-9;      ///< s
    double grav_constant = 6.674e-11;
    double earth_mass = 5.972e24;

    void validate() const;
};

/// Far-field fraction of a Gaussian beam captured by a circular aperture.
double far_field_transmissivity(const LinkBudget& link);

/// Every intermediate of effective_channel, for the run manifest.
struct LinkProvenance {
    double rayleigh_range = 0.0;
    double beam_radius_rx = 0.0;
    double tau_fs = 0.0;
    double tau_total = 0.0;
    double t_coeff = 0.0;
    double sigma_cl_in = 0.0;
    double noise_variance_in = 0.0;
    double noise_variance_eff = 0.0;
    double sigma_cl_eff = 0.0;
};

struct EffectiveChannel {
    ChannelConfig channel;
    HqnParams noise;
    LinkProvenance provenance;
};

/// T = sqrt(eta_det * tau_fs); sigma_cl^2 -> sigma_cl^2 + nu_ele + epsilon.
/// Modulation statistics are taken from `modulation` unchanged.
EffectiveChannel effective_channel(const LinkBudget& link, const HqnParams& base,
                                   const ChannelConfig& modulation = {});

}  // namespace hqsat
