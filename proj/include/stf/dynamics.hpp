#pragma once

// Conservative flux-form discretization of the drift and noise operators.
//
// Face j lives at x_{j+1/2}. Every operator returns a discrete divergence
// (Phi_{i+1/2} - Phi_{i-1/2})/dx, so its rectangle-rule integral telescopes
// to zero.

#include "stf/functionals.hpp"
#include "stf/grid.hpp"
#include "stf/noise.hpp"

#include <optional>
#include <span>
#include <vector>

namespace stf {

struct FluxField {
    PeriodicGrid grid;
    std::vector<double> face_values;

    explicit FluxField(const PeriodicGrid& g) : grid(g), face_values(static_cast<std::size_t>(g.size()), 0.0) {}
};

/// (Phi_{i+1/2} - Phi_{i-1/2}) / dx.
GridFunction divergence(const FluxField& flux);

/// ((f_j + f_{j+1})/2)^a on every face. Throws NonPositiveField for
/// non-positive face averages when a is fractional.
std::vector<double> face_mobility(const GridFunction& f, double a);

/// p = -f_xx + eps F'(f) with the compact second difference.
GridFunction pressure(const GridFunction& f, const ModelParams& params);

/// Face flux M (p_{j+1}-p_j)/dx + (c_strat+S) Mc (f_{j+1}-f_j)/dx.
FluxField drift_flux(const GridFunction& f, const ModelParams& params);

/// Semi-discrete deterministic right-hand side: div(u^n p_x) + (c_strat+S) div(u^{n-2} u_x) + forcing.
GridFunction drift(const GridFunction& f, const ModelParams& params,
                   const std::optional<GridFunction>& forcing = std::nullopt);

/// Cached basis values at faces for one (spectrum, grid) pair.
class FaceBasis {
public:
    FaceBasis(const NoiseSpectrum& spec, const PeriodicGrid& grid);

    const NoiseSpectrum& spectrum() const { return spec_; }
    const PeriodicGrid& grid() const { return grid_; }
    /// g_k(x_{j+1/2}).
    double operator()(int k, int j) const
    {
        return table_[static_cast<std::size_t>((k + spec_.truncation()) * grid_.size() + j)];
    }

private:
    NoiseSpectrum spec_;
    PeriodicGrid grid_;
    std::vector<double> table_;
};

/// Face flux sum_k lambda_k dbeta_k g_k(x_{j+1/2}) ((f_j^{n/2} + f_{j+1}^{n/2})/2).
FluxField noise_flux(const GridFunction& f, std::span<const double> increments, const FaceBasis& basis,
                     double n);

GridFunction noise_operator(const GridFunction& f, std::span<const double> increments, const FaceBasis& basis,
                            double n);
GridFunction noise_operator(const GridFunction& f, std::span<const double> increments, const NoiseSpectrum& spec,
                            double n);

/// Noise direction of mode k for a unit increment, without the lambda_k factor:
/// b_k = div(g_k (f^{n/2})_face).
GridFunction noise_column(const GridFunction& f, int k, const FaceBasis& basis, double n);

} // namespace stf
