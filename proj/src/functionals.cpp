#include "stf/functionals.hpp"

#include "stf/errors.hpp"
#include "stf/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
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

// max(f, 0)^b, used where zeros are legitimate (b > 0).
GridFunction clamped_power(const GridFunction& f, double b)
{
    GridFunction out(f.grid());
    for (int i = 0; i < f.size(); ++i)
        out[i] = std::pow(std::max(f[i], 0.0), b);
    return out;
}

} // namespace

void ModelParams::validate(bool strict) const
{
    if (!(n > 2.0 && n < 3.0))
        throw MobilityOutOfRange("mobility exponent n must lie in (2,3); got " + std::to_string(n));
    if (!(p > 2.0))
        throw InvalidArgument("potential exponent p must be > 2; got " + std::to_string(p));
    if (!(eps >= 0.0))
        throw InvalidArgument("epsilon must be >= 0");
    if (!(S >= 0.0))
        throw InvalidArgument("S must be >= 0");
    if (!(c_strat >= 0.0))
        throw InvalidArgument("c_strat must be >= 0");
    if (strict) {
        const double threshold = s_thresholds(n, c_strat).S_A3star;
        if (!(S > threshold))
            throw InvalidArgument("S = " + std::to_string(S) + " does not exceed the admissibility threshold " +
                                  std::to_string(threshold));
    }
}

bool FunctionalReport::has_flag(const std::string& f) const
{
    return std::find(flags.begin(), flags.end(), f) != flags.end();
}

double potential(double u, double p)
{
    return std::pow(u, -p);
}

double potential_d1(double u, double p)
{
    return -p * std::pow(u, -p - 1.0);
}

double potential_d2(double u, double p)
{
    return p * (p + 1.0) * std::pow(u, -p - 2.0);
}

double mass(const GridFunction& f)
{
    return integrate(f);
}

double energy(const GridFunction& f)
{
    const GridFunction g = face_gradient(f);
    return 0.5 * integrate(hadamard(g, g));
}

double energy_eps(const GridFunction& f, const ModelParams& params)
{
    const double e = energy(f);
    if (params.eps == 0.0)
        return e;
    return e + params.eps * integrate(pointwise_power(f, -params.p));
}

double entropy_density(double u, double n)
{
    return std::pow(u, 2.0 - n) / ((n - 1.0) * (n - 2.0)) + u / (n - 1.0) - 1.0 / (n - 2.0);
}

double entropy_density_d1(double u, double n)
{
    return (1.0 - std::pow(u, 1.0 - n)) / (n - 1.0);
}

double entropy(const GridFunction& f, double n)
{
    require_positive(f, "entropy");
    GridFunction g(f.grid());
    for (int i = 0; i < f.size(); ++i)
        g[i] = entropy_density(f[i], n);
    return integrate(g);
}

double alpha_entropy_density(double u, double alpha)
{
    return std::pow(u, alpha + 1.0) / (alpha * (alpha + 1.0)) - u / alpha + 1.0 / (alpha + 1.0);
}

double alpha_entropy(const GridFunction& f, double alpha)
{
    if (alpha == 0.0 || alpha == -1.0)
        throw AlphaSingular("alpha-entropy is singular for alpha in {0, -1}");
    require_positive(f, "alpha_entropy");
    GridFunction g(f.grid());
    for (int i = 0; i < f.size(); ++i)
        g[i] = alpha_entropy_density(f[i], alpha);
    return integrate(g);
}

double weighted_integral(const GridFunction& f, double a, int m, double q)
{
    if (!(q >= 1.0))
        throw InvalidArgument("weighted_integral: power q must be >= 1");
    const bool needs_positive = a != 0.0 && (!is_integer_exponent(a) || a < 0.0);
    if (needs_positive)
        require_positive(f, "weighted_integral");
    const GridFunction d = deriv(f, m);
    GridFunction g(f.grid());
    for (int i = 0; i < f.size(); ++i) {
        const double w = a == 0.0 ? 1.0 : std::pow(f[i], a);
        g[i] = w * std::pow(std::abs(d[i]), q);
    }
    return integrate(g);
}

double power_derivative_integral(const GridFunction& f, double b, int m, double q)
{
    if (!(b > 0.0))
        throw InvalidArgument("power_derivative_integral: exponent must be positive");
    const GridFunction d = deriv(clamped_power(f, b), m);
    GridFunction g(f.grid());
    for (int i = 0; i < f.size(); ++i)
        g[i] = std::pow(std::abs(d[i]), q);
    return integrate(g);
}

FunctionalReport bernis_check(const GridFunction& f, const GridFunction& zeta, double n,
                              std::optional<double> pos_floor)
{
    if (!(f.grid() == zeta.grid()))
        throw InvalidArgument("bernis_check: cutoff lives on a different grid");
    const double floor = pos_floor.value_or(1e-8 * std::max(f.max(), 0.0));
    if (!(floor >= 0.0))
        throw InvalidArgument("bernis_check: pos_floor must be >= 0");

    const GridFunction d1 = deriv(clamped_power(f, (n + 2.0) / 6.0), 1);
    const GridFunction d2 = deriv(clamped_power(f, (n + 2.0) / 3.0), 2);
    const GridFunction d3 = deriv(clamped_power(f, (n + 2.0) / 2.0), 3);
    const GridFunction fxxx = deriv(f, 3);
    const GridFunction zx = deriv(zeta, 1);

    const int N = f.size();
    GridFunction l1(f.grid()), l2(f.grid()), l3(f.grid()), r1(f.grid()), r2(f.grid());
    for (int i = 0; i < N; ++i) {
        const double z2 = zeta[i] * zeta[i];
        const double z6 = z2 * z2 * z2;
        const bool positive = f[i] > floor;
        l1[i] = z6 * std::pow(std::abs(d1[i]), 6.0);
        l2[i] = z6 * std::pow(std::abs(d2[i]), 3.0);
        l3[i] = positive ? z6 * d3[i] * d3[i] : 0.0;
        r1[i] = positive ? z6 * std::pow(f[i], n) * fxxx[i] * fxxx[i] : 0.0;
        const double zx2 = zx[i] * zx[i];
        r2[i] = zx2 * zx2 * zx2 * std::pow(std::max(f[i], 0.0), n + 2.0);
    }

    FunctionalReport rep;
    rep.name = "bernis";
    const double lhs[3] = {integrate(l1), integrate(l2), integrate(l3)};
    const double rhs1 = integrate(r1);
    const double rhs2 = integrate(r2);
    const double denom = rhs1 + rhs2;
    rep.metadata["lhs1"] = lhs[0];
    rep.metadata["lhs2"] = lhs[1];
    rep.metadata["lhs3"] = lhs[2];
    rep.metadata["rhs1"] = rhs1;
    rep.metadata["rhs2"] = rhs2;
    rep.metadata["pos_floor"] = floor;

    double worst = 0.0;
    for (int k = 0; k < 3; ++k) {
        const std::string key = "ratio" + std::to_string(k + 1);
        double ratio;
        if (denom > 0.0) {
            ratio = lhs[k] / denom;
        } else if (lhs[k] > 0.0) {
            ratio = std::numeric_limits<double>::infinity();
            rep.flags.push_back(key + ":divergent");
        } else {
            ratio = 0.0;
            rep.flags.push_back(key + ":0/0");
        }
        rep.metadata[key] = ratio;
        worst = std::max(worst, ratio);
    }
    rep.value = worst;
    return rep;
}

FunctionalReport positivity_bound_check(const GridFunction& f, const ModelParams& params)
{
    require_positive(f, "positivity_bound_check");
    if (!(params.eps > 0.0))
        throw InvalidArgument("positivity_bound_check: needs eps > 0");
    const double p = params.p;
    const double eps = params.eps;
    const double H = energy_eps(f, params);
    const double mean = mass(f) / f.grid().length();
    double inv_max = 0.0;
    for (int i = 0; i < f.size(); ++i)
        inv_max = std::max(inv_max, 1.0 / f[i]);

    const double numerator = std::max(inv_max - 1.0 / mean, 0.0);
    const double denominator = std::pow(eps, 1.0 / (2.0 - p)) * std::pow(H, 2.0 / (p - 2.0));
    const double sigma = 1.0 / std::max(1.0, H);
    const double min_denominator = std::pow(eps, 1.0 / (p - 2.0)) * std::pow(sigma, 2.0 / (p - 2.0));

    FunctionalReport rep;
    rep.name = "positivity_bound";
    rep.value = numerator / denominator;
    rep.metadata["C_p"] = rep.value;
    rep.metadata["Cbar_p"] = f.min() / min_denominator;
    rep.metadata["numerator"] = numerator;
    rep.metadata["denominator"] = denominator;
    rep.metadata["min_denominator"] = min_denominator;
    rep.metadata["H_eps"] = H;
    rep.metadata["sigma"] = sigma;
    return rep;
}

GammaWindow gamma_range(double alpha, double n)
{
    if (alpha == 0.0 || alpha == -1.0)
        throw AlphaOutOfRange("gamma_range: alpha must avoid {0, -1}");
    const double t = alpha + n;
    // Closed window [1/2 - n, 2 - n]: the discriminant vanishes at both ends.
    if (!(t >= 0.5 && t <= 2.0))
        throw AlphaOutOfRange("gamma_range: alpha + n = " + std::to_string(t) + " outside [1/2, 2]");
    const double disc = std::max((t - 2.0) * (1.0 - 2.0 * t), 0.0);
    const double r = std::sqrt(disc);
    return {(t + 1.0 - r) / 3.0, (t + 1.0 + r) / 3.0};
}

double gamma_window_coefficient(double gamma, double alpha, double n)
{
    return -(gamma - 1.0) * (gamma - 1.0) + (2.0 * gamma - n - alpha - 1.0) * (n + alpha - 2.0) / 3.0;
}

EstimateConstants estimate_constants(double n, double S, double c_strat, double mu, double eta)
{
    if (!(n > 2.0 && n < 3.0))
        throw MobilityOutOfRange("mobility exponent n must lie in (2,3); got " + std::to_string(n));
    const double c1 = mu * S * std::abs((n - 2.0) * (n - 3.0)) / 3.0 - eta;
    const double c2 = S + S * (1.0 - mu) * 3.0 * (n - 2.0) / (3.0 - n) -
                      c_strat * 9.0 * (n - 2.0) * (n - 2.0) / (4.0 * (n - 3.0) * (n - 3.0));
    return {c1, c2, c1 > 0.0 && c2 > 0.0};
}

MinSupport min_and_support(const GridFunction& f, double threshold)
{
    int count = 0;
    for (int i = 0; i < f.size(); ++i)
        if (f[i] > threshold)
            ++count;
    return {f.min(), f.grid().dx() * count};
}

} // namespace stf
