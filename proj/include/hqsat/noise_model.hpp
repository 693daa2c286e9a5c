#pragma once

// Hybrid quantum noise (truncated Poisson photon count plus classical
// Gaussian noise) as a Gaussian mixture, and the additive channel Y = T X + Z.

#include "hqsat/core.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace hqsat {

struct HqnParams {
    double lambda = 3.0;   ///< mean photon count per pulse
    int r_max = 6;         ///< Poisson truncation order; the mixture has r_max + 1 components
    double mu_cl = 0.0;    ///< classical noise mean
    double sigma_cl = 1.0; ///< classical noise standard deviation

    /// Throws DomainError when an invariant is violated.
    void validate() const;
};

struct GaussianComponent {
    double weight = 0.0;
    Vector mean;
    Matrix covariance;
};

struct GmmModel {
    int dim = 0;
    std::vector<GaussianComponent> components;
    /// True when weights were renormalized to sum to one; false for the
    /// truncated-Poisson mixtures whose mass is below one.
    bool normalized = true;

    std::size_t size() const noexcept { return components.size(); }
    double total_weight() const;
    /// Copy with weights divided by their sum.
    GmmModel renormalized() const;
    /// Shape and covariance checks. Throws DomainError.
    void validate() const;
};

struct ChannelConfig {
    double t_coeff = 1.0; ///< amplitude transmission coefficient T
    double mu_x = 0.0;
    double sigma_x = 1.0;

    void validate() const;
};

/// e^{-lambda} lambda^i / i!, evaluated in log space.
double poisson_weight(double lambda, long i);

/// Sum of the r_max + 1 retained Poisson weights.
double truncated_mass(const HqnParams& params);

GmmModel hqn_gmm_1d(const HqnParams& params);

/// Component i: mean (mu_cl + i) * 1_D, covariance sigma_cl^2 * I_D.
GmmModel hqn_gmm_nd(const HqnParams& params, int dim);

/// Density with the raw (possibly unnormalized) weights.
double mixture_density(const GmmModel& model, const Vector& x);
double mixture_density(const GmmModel& model, double x);

/// Single-draw sampler: photon count conditioned on <= r_max (rejection,
/// or inverse CDF when the retained mass is tiny) plus the Gaussian part.
class HqnSampler {
public:
    explicit HqnSampler(const HqnParams& params);
    long count(std::mt19937_64& rng) const;
    double operator()(std::mt19937_64& rng) const;

private:
    HqnParams params_;
    std::vector<double> cdf_; ///< non-empty when drawing by inverse CDF
};

/// Truncated-Poisson count plus Gaussian draws. Chunk-seeded, so the output
/// is a pure function of (params, n, seed).
std::vector<double> sample_hqn(const HqnParams& params, std::size_t n, std::uint64_t seed);

/// n draws from the renormalized mixture, one sample per row.
Matrix sample_gmm(const GmmModel& model, std::size_t n, std::uint64_t seed);

/// Gaussian modulation draws X ~ N(mu_x, sigma_x^2).
std::vector<double> sample_input(const ChannelConfig& config, std::size_t n, std::uint64_t seed);

/// y_k = T x_k + z_k with z drawn by sample_hqn(params, |x|, seed).
std::vector<double> simulate_channel(const ChannelConfig& config, const HqnParams& params,
                                     std::span<const double> x, std::uint64_t seed);

/// Same channel with z drawn from an arbitrary 1-D noise mixture.
std::vector<double> simulate_channel(const ChannelConfig& config, const GmmModel& noise,
                                     std::span<const double> x, std::uint64_t seed);

/// Received-signal mixture for Gaussian modulation: component r has weight
/// w_r, mean T mu_x + mu_cl + r and variance T^2 sigma_x^2 + sigma_cl^2.
GmmModel received_pdf(const ChannelConfig& config, const HqnParams& params);

/// Convolution of N(T mu_x, T^2 sigma_x^2) with a 1-D noise mixture.
GmmModel received_pdf(const ChannelConfig& config, const GmmModel& noise);

struct Moments {
    Vector mean;
    Matrix covariance;
};

/// Mean and covariance of the renormalized mixture.
Moments mixture_moments(const GmmModel& model);

}  // namespace hqsat
