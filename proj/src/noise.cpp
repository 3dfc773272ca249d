#include "stf/noise.hpp"

#include "stf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace stf {

namespace {

constexpr double kPi = std::numbers::pi;

double omega(int k, double L)
{
    return 2.0 * kPi * static_cast<double>(k) / L;
}

} // namespace

double basis_eval(int k, double x, double L)
{
    if (k == 0)
        return 1.0 / std::sqrt(L);
    const double c = std::sqrt(2.0 / L);
    return k > 0 ? c * std::sin(omega(k, L) * x) : c * std::cos(omega(k, L) * x);
}

double basis_dx(int k, double x, double L)
{
    if (k == 0)
        return 0.0;
    const double c = std::sqrt(2.0 / L);
    const double w = omega(k, L);
    return k > 0 ? c * w * std::cos(w * x) : -c * w * std::sin(w * x);
}

double basis_dxx(int k, double x, double L)
{
    if (k == 0)
        return 0.0;
    const double w = omega(k, L);
    return -w * w * basis_eval(k, x, L);
}

SpectrumMode parse_spectrum_mode(const std::string& name)
{
    if (name == "single")
        return SpectrumMode::single;
    if (name == "flat")
        return SpectrumMode::flat;
    if (name == "power-decay")
        return SpectrumMode::power_decay;
    throw InvalidArgument("unknown noise mode \"" + name + "\" (expected single, flat or power-decay)");
}

std::string to_string(SpectrumMode mode)
{
    switch (mode) {
    case SpectrumMode::single:
        return "single";
    case SpectrumMode::flat:
        return "flat";
    case SpectrumMode::power_decay:
        return "power-decay";
    }
    return "?";
}

NoiseSpectrum::NoiseSpectrum(int K, double L, std::vector<double> coefficients)
    : K_(K), L_(L), lambda_(std::move(coefficients))
{
    if (K < 0)
        throw InvalidArgument("noise truncation K must be >= 0");
    if (!(L > 0.0))
        throw InvalidArgument("noise domain length must be positive");
    if (lambda_.size() != static_cast<std::size_t>(2 * K + 1))
        throw InvalidArgument("noise spectrum needs 2K+1 coefficients");
    for (int k = -K; k <= K; ++k) {
        if (!(lambda(k) >= 0.0) || !std::isfinite(lambda(k)))
            throw InvalidArgument("noise coefficients must be finite and nonnegative");
        if (lambda(k) != lambda(-k))
            throw InvalidArgument("noise spectrum must satisfy lambda_k == lambda_-k");
    }
}

bool NoiseSpectrum::is_zero() const
{
    return std::all_of(lambda_.begin(), lambda_.end(), [](double v) { return v == 0.0; });
}

double NoiseSpectrum::colored_sum() const
{
    double s = 0.0;
    for (int k = -K_; k <= K_; ++k) {
        const double k2 = static_cast<double>(k) * k;
        s += k2 * k2 * lambda(k) * lambda(k);
    }
    return s;
}

NoiseSpectrum NoiseSpectrum::scaled(double factor) const
{
    std::vector<double> l = lambda_;
    for (double& v : l)
        v *= factor;
    return NoiseSpectrum(K_, L_, std::move(l));
}

NoiseSpectrum build_spectrum(SpectrumMode mode, double amplitude, double decay, int K, double L)
{
    if (!(amplitude >= 0.0))
        throw InvalidArgument("noise amplitude must be >= 0");
    if (K < 0)
        throw InvalidArgument("noise truncation K must be >= 0");
    std::vector<double> lambda(static_cast<std::size_t>(2 * K + 1), 0.0);
    auto set = [&](int k, double v) {
        lambda[static_cast<std::size_t>(K + k)] = v;
        lambda[static_cast<std::size_t>(K - k)] = v;
    };
    switch (mode) {
    case SpectrumMode::single:
        set(0, amplitude);
        break;
    case SpectrumMode::flat:
        for (int k = 0; k <= K; ++k)
            set(k, amplitude);
        break;
    case SpectrumMode::power_decay:
        if (!(decay > 2.5))
            throw DecayTooWeak("power-decay spectrum needs decay > 5/2 so that sum k^4 lambda_k^2 converges; got " +
                               std::to_string(decay));
        set(0, amplitude);
        for (int k = 1; k <= K; ++k)
            set(k, amplitude * std::pow(static_cast<double>(k), -decay));
        break;
    }
    return NoiseSpectrum(K, L, std::move(lambda));
}

double c_strat(const NoiseSpectrum& spec, double n)
{
    const double L = spec.length();
    double sum = spec.lambda(0) * spec.lambda(0) / L;
    for (int k = 1; k <= spec.truncation(); ++k)
        sum += 2.0 * spec.lambda(k) * spec.lambda(k) / L;
    return 0.5 * (n * n / 4.0) * sum;
}

SThresholds s_thresholds(double n, double c)
{
    if (!(n > 2.0 && n < 3.0))
        throw MobilityOutOfRange("mobility exponent n must lie in (2,3); got " + std::to_string(n));
    const double a3 = c * 3.0 * std::pow(2.0, 4.0 - n) * (n - 2.0) / (3.0 - n);
    const double a3star = c * 2.25 * (n - 2.0) * (n - 2.0) / ((3.0 - n) * (2.0 * n - 3.0));
    return {a3, a3star};
}

OnbReport onb_relation_values(const NoiseSpectrum& spec, const PeriodicGrid& grid)
{
    const int K = spec.truncation();
    if (4 * K >= grid.size())
        throw TruncationTooLarge("ONB relations need K < N/4; got K=" + std::to_string(K) +
                                 ", N=" + std::to_string(grid.size()));
    const double L = spec.length();
    const double pi2 = kPi * kPi;

    OnbReport rep;
    double s0 = spec.lambda(0) * spec.lambda(0) / L;
    double s2 = 0.0;
    double s4 = 0.0;
    for (int k = 1; k <= K; ++k) {
        const double l2 = spec.lambda(k) * spec.lambda(k);
        const double kk = static_cast<double>(k) * k;
        s0 += 2.0 * l2 / L;
        s2 += l2 * kk * 8.0 * pi2 / (L * L * L);
        s4 += l2 * kk * kk * 32.0 * pi2 * pi2 / (L * L * L * L * L);
    }
    rep.closed_form = {s0, s2, 0.0, s4, 0.0, -s2};
    const std::array<double, OnbReport::kRelations> scale{
        s0, s2, std::sqrt(s0 * s2), s4, std::sqrt(s2 * s4), std::sqrt(s0 * s4)};

    for (int i = 0; i < grid.size(); ++i) {
        const double x = grid.node(i);
        std::array<double, OnbReport::kRelations> lhs{};
        for (int k = -K; k <= K; ++k) {
            const double l2 = spec.lambda(k) * spec.lambda(k);
            const double g = basis_eval(k, x, L);
            const double gx = basis_dx(k, x, L);
            const double gxx = basis_dxx(k, x, L);
            lhs[0] += l2 * g * g;
            lhs[1] += l2 * gx * gx;
            lhs[2] += l2 * g * gx;
            lhs[3] += l2 * gxx * gxx;
            lhs[4] += l2 * gx * gxx;
            lhs[5] += l2 * g * gxx;
        }
        for (int r = 0; r < OnbReport::kRelations; ++r) {
            const double dev = std::abs(lhs[static_cast<std::size_t>(r)] - rep.closed_form[static_cast<std::size_t>(r)]);
            auto& abs_dev = rep.max_abs_dev[static_cast<std::size_t>(r)];
            auto& rel_dev = rep.max_rel_dev[static_cast<std::size_t>(r)];
            abs_dev = std::max(abs_dev, dev);
            rel_dev = std::max(rel_dev, dev / std::max(1.0, scale[static_cast<std::size_t>(r)]));
        }
    }
    rep.max_deviation = *std::max_element(rep.max_rel_dev.begin(), rep.max_rel_dev.end());
    return rep;
}

std::vector<double> sample_increments(const NoiseSpectrum& spec, double dt, RngStream& stream)
{
    if (!(dt > 0.0))
        throw InvalidArgument("sample_increments: dt must be positive");
    std::vector<double> out(static_cast<std::size_t>(spec.mode_count()));
    stream.normals(out, StreamPurpose::increments);
    const double s = std::sqrt(dt);
    for (double& v : out)
        v *= s;
    return out;
}

std::vector<double> face_basis_table(const NoiseSpectrum& spec, const PeriodicGrid& grid)
{
    const int K = spec.truncation();
    const int N = grid.size();
    std::vector<double> table(static_cast<std::size_t>((2 * K + 1) * N));
    for (int k = -K; k <= K; ++k)
        for (int j = 0; j < N; ++j)
            table[static_cast<std::size_t>((k + K) * N + j)] = basis_eval(k, grid.face(j), spec.length());
    return table;
}

} // namespace stf
