#pragma once

// Scalar functionals, inequalities and derived constants monitored along
// trajectories: mass, energies, entropies, weighted Sobolev integrals,
// Bernis quantities, positivity and support diagnostics.

#include "stf/grid.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace stf {

struct ModelParams {
    double n = 2.5;       ///< mobility exponent, in (2,3)
    double p = 4.0;       ///< potential exponent F(u) = u^{-p}, > 2
    double eps = 0.0;     ///< potential strength
    double S = 0.0;       ///< extra dissipativity margin
    double c_strat = 0.0; ///< Stratonovich constant of the noise spectrum

    /// Throws MobilityOutOfRange / InvalidArgument. In strict mode additionally
    /// requires S above the weaker admissibility threshold.
    void validate(bool strict = false) const;

    double correction() const { return c_strat + S; }
};

struct FunctionalReport {
    std::string name;
    double value = 0.0;
    std::map<std::string, double> metadata;
    std::vector<std::string> flags;

    bool has_flag(const std::string& f) const;
};

// Potential F(u) = u^{-p} and its derivatives.
double potential(double u, double p);
double potential_d1(double u, double p);
double potential_d2(double u, double p);

double mass(const GridFunction& f);

/// Plain energy 1/2 int u_x^2 with the face (forward) difference gradient.
double energy(const GridFunction& f);
/// E^eps[u] = 1/2 int u_x^2 + eps int u^{-p}. eps == 0 gives energy().
double energy_eps(const GridFunction& f, const ModelParams& params);

/// G(u) = u^{2-n}/((n-1)(n-2)) + u/(n-1) - 1/(n-2).
double entropy_density(double u, double n);
double entropy_density_d1(double u, double n);
double entropy(const GridFunction& f, double n);

/// G_alpha(u) = u^{alpha+1}/(alpha(alpha+1)) - u/alpha + 1/(alpha+1).
double alpha_entropy_density(double u, double alpha);
double alpha_entropy(const GridFunction& f, double alpha);

/// int f^a |d^m f|^q with central differences.
double weighted_integral(const GridFunction& f, double a, int m, double q);

/// int |d^m (f^b)|^q; zeros are allowed for b > 0.
double power_derivative_integral(const GridFunction& f, double b, int m, double q);

/// Weighted Bernis inequalities with cutoff zeta: three left-hand sides and
/// the two right-hand terms, plus ratios lhs_i/(rhs1+rhs2) in metadata.
/// pos_floor defaults to 1e-8 max(f).
FunctionalReport bernis_check(const GridFunction& f, const GridFunction& zeta, double n,
                              std::optional<double> pos_floor = std::nullopt);

/// Empirical constants of the sup(1/u) and min(u) bounds in terms of the
/// regularized energy. Requires eps > 0 and f > 0.
FunctionalReport positivity_bound_check(const GridFunction& f, const ModelParams& params);

/// Closed interval of admissible gamma for the alpha-entropy estimate.
struct GammaWindow {
    double lo;
    double hi;
};
GammaWindow gamma_range(double alpha, double n);

/// -(g-1)^2 + (1/3)(2g - n - alpha - 1)(n + alpha - 2).
double gamma_window_coefficient(double gamma, double alpha, double n);

struct EstimateConstants {
    double c1;
    double c2;
    bool admissible;
};
EstimateConstants estimate_constants(double n, double S, double c_strat, double mu, double eta);

struct MinSupport {
    double min;
    double support_length;
};
MinSupport min_and_support(const GridFunction& f, double threshold);

} // namespace stf
