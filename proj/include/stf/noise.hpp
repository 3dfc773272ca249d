#pragma once

// Q-Wiener noise: trigonometric eigenbasis of the periodic Laplacian,
// coefficient spectra, the Stratonovich constant and the S thresholds.

#include "stf/grid.hpp"
#include "stf/rng.hpp"

#include <array>
#include <string>
#include <vector>

namespace stf {

/// Basis function g_k at x (k > 0: sine, k = 0: constant, k < 0: cosine).
double basis_eval(int k, double x, double L);
/// Analytic first derivative of g_k.
double basis_dx(int k, double x, double L);
/// Analytic second derivative of g_k.
double basis_dxx(int k, double x, double L);

enum class SpectrumMode { single, flat, power_decay };

SpectrumMode parse_spectrum_mode(const std::string& name);
std::string to_string(SpectrumMode mode);

/// Symmetric coefficients lambda_k, |k| <= K.
class NoiseSpectrum {
public:
    NoiseSpectrum() = default;
    /// `lambda` holds modes -K..K in order; throws InvalidArgument if it is
    /// not symmetric, has negative entries or the wrong length.
    NoiseSpectrum(int K, double L, std::vector<double> lambda);

    int truncation() const { return K_; }
    double length() const { return L_; }
    int mode_count() const { return 2 * K_ + 1; }
    double lambda(int k) const { return lambda_[static_cast<std::size_t>(k + K_)]; }
    const std::vector<double>& coefficients() const { return lambda_; }
    bool is_zero() const;

    /// sum_k k^4 lambda_k^2.
    double colored_sum() const;

    NoiseSpectrum scaled(double factor) const;

private:
    int K_ = 0;
    double L_ = 1.0;
    std::vector<double> lambda_{0.0};
};

NoiseSpectrum build_spectrum(SpectrumMode mode, double amplitude, double decay, int K, double L);

/// Closed-form Stratonovich constant (1/2)(n^2/4)(lambda_0^2/L + sum_{k>=1} 2 lambda_k^2/L).
double c_strat(const NoiseSpectrum& spec, double n);

struct SThresholds {
    double S_A3;     ///< c 3 2^{4-n} (n-2)/(3-n)
    double S_A3star; ///< c (9/4)(n-2)^2/((3-n)(2n-3))
};

/// Throws MobilityOutOfRange unless n lies in (2, 3).
SThresholds s_thresholds(double n, double c_strat);

/// Deviations of the six pointwise identities of the ONB sums from their
/// closed forms, evaluated at every grid node.
struct OnbReport {
    static constexpr int kRelations = 6;
    std::array<double, kRelations> closed_form{};   ///< right-hand sides
    std::array<double, kRelations> max_abs_dev{};   ///< max_i |lhs(x_i) - rhs|
    std::array<double, kRelations> max_rel_dev{};   ///< abs dev / max(1, natural scale)
    double max_deviation = 0.0;                     ///< max over max_rel_dev
};

/// Throws TruncationTooLarge when K >= N/4.
OnbReport onb_relation_values(const NoiseSpectrum& spec, const PeriodicGrid& grid);

/// Brownian increments Delta beta_k ~ N(0, dt), one per mode -K..K, in that order.
std::vector<double> sample_increments(const NoiseSpectrum& spec, double dt, RngStream& stream);

/// Basis values at faces x_{j+1/2}, stored mode-major: table[(k+K)*N + j].
std::vector<double> face_basis_table(const NoiseSpectrum& spec, const PeriodicGrid& grid);

} // namespace stf
