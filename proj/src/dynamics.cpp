#include "stf/dynamics.hpp"

#include "stf/errors.hpp"

#include <cmath>
#include <string>

namespace stf {

namespace {

void require_positive(const GridFunction& f, const char* who)
{
    for (int i = 0; i < f.size(); ++i)
        if (!(f[i] > 0.0))
            throw NonPositiveField(std::string(who) + ": field must be strictly positive; node " +
                                   std::to_string(i) + " has value " + std::to_string(f[i]));
}

// Face average of f^{n/2}.
std::vector<double> face_noise_amplitude(const GridFunction& f, double n)
{
    const int N = f.size();
    std::vector<double> nodal(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i)
        nodal[static_cast<std::size_t>(i)] = std::pow(f[i], 0.5 * n);
    std::vector<double> face(static_cast<std::size_t>(N));
    for (int j = 0; j < N; ++j)
        face[static_cast<std::size_t>(j)] =
            0.5 * (nodal[static_cast<std::size_t>(j)] + nodal[static_cast<std::size_t>(f.grid().wrap(j + 1))]);
    return face;
}

} // namespace

GridFunction divergence(const FluxField& flux)
{
    const PeriodicGrid& g = flux.grid;
    GridFunction out(g);
    const int N = g.size();
    for (int i = 0; i < N; ++i)
        out[i] = (flux.face_values[static_cast<std::size_t>(i)] -
                  flux.face_values[static_cast<std::size_t>(g.wrap(i - 1))]) /
                 g.dx();
    return out;
}

std::vector<double> face_mobility(const GridFunction& f, double a)
{
    const int N = f.size();
    const bool fractional = !is_integer_exponent(a);
    std::vector<double> m(static_cast<std::size_t>(N));
    for (int j = 0; j < N; ++j) {
        const double avg = 0.5 * (f[j] + f.at(j + 1));
        if (fractional && !(avg > 0.0))
            throw NonPositiveField("face_mobility: non-positive face average at face " + std::to_string(j));
        m[static_cast<std::size_t>(j)] = std::pow(avg, a);
    }
    return m;
}

GridFunction pressure(const GridFunction& f, const ModelParams& params)
{
    GridFunction p = deriv(f, 2);
    p *= -1.0;
    if (params.eps != 0.0) {
        require_positive(f, "pressure");
        for (int i = 0; i < f.size(); ++i)
            p[i] += params.eps * potential_d1(f[i], params.p);
    }
    return p;
}

FluxField drift_flux(const GridFunction& f, const ModelParams& params)
{
    require_positive(f, "drift");
    const PeriodicGrid& g = f.grid();
    const GridFunction p = pressure(f, params);
    const std::vector<double> M = face_mobility(f, params.n);
    const double corr = params.correction();
    std::vector<double> Mc;
    if (corr != 0.0)
        Mc = face_mobility(f, params.n - 2.0);

    FluxField flux(g);
    for (int j = 0; j < g.size(); ++j) {
        const auto js = static_cast<std::size_t>(j);
        double phi = M[js] * (p.at(j + 1) - p[j]) / g.dx();
        if (corr != 0.0)
            phi += corr * Mc[js] * (f.at(j + 1) - f[j]) / g.dx();
        flux.face_values[js] = phi;
    }
    return flux;
}

GridFunction drift(const GridFunction& f, const ModelParams& params, const std::optional<GridFunction>& forcing)
{
    GridFunction d = divergence(drift_flux(f, params));
    if (forcing)
        d += *forcing;
    return d;
}

FaceBasis::FaceBasis(const NoiseSpectrum& spec, const PeriodicGrid& grid)
    : spec_(spec), grid_(grid), table_(face_basis_table(spec, grid))
{
}

FluxField noise_flux(const GridFunction& f, std::span<const double> increments, const FaceBasis& basis, double n)
{
    const NoiseSpectrum& spec = basis.spectrum();
    const int K = spec.truncation();
    if (increments.size() != static_cast<std::size_t>(spec.mode_count()))
        throw InvalidArgument("noise_operator: need one increment per mode");
    if (!(f.grid() == basis.grid()))
        throw InvalidArgument("noise_operator: basis table built for another grid");
    require_positive(f, "noise_operator");

    const int N = f.size();
    FluxField flux(f.grid());
    if (spec.is_zero())
        return flux;
    const std::vector<double> amp = face_noise_amplitude(f, n);
    for (int j = 0; j < N; ++j) {
        double w = 0.0;
        for (int k = -K; k <= K; ++k) {
            const double c = spec.lambda(k) * increments[static_cast<std::size_t>(k + K)];
            if (c != 0.0)
                w += c * basis(k, j);
        }
        flux.face_values[static_cast<std::size_t>(j)] = w * amp[static_cast<std::size_t>(j)];
    }
    return flux;
}

GridFunction noise_operator(const GridFunction& f, std::span<const double> increments, const FaceBasis& basis,
                            double n)
{
    return divergence(noise_flux(f, increments, basis, n));
}

GridFunction noise_operator(const GridFunction& f, std::span<const double> increments, const NoiseSpectrum& spec,
                            double n)
{
    return noise_operator(f, increments, FaceBasis(spec, f.grid()), n);
}

GridFunction noise_column(const GridFunction& f, int k, const FaceBasis& basis, double n)
{
    require_positive(f, "noise_column");
    const std::vector<double> amp = face_noise_amplitude(f, n);
    FluxField flux(f.grid());
    for (int j = 0; j < f.size(); ++j)
        flux.face_values[static_cast<std::size_t>(j)] = basis(k, j) * amp[static_cast<std::size_t>(j)];
    return divergence(flux);
}

} // namespace stf
