#include "stf/errors.hpp"
#include "stf/noise.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace stf;

namespace {

constexpr double kPi = std::numbers::pi;

// Oracle for c_strat: (1/2)(n^2/4)(1/L) * integral of sum_k lambda_k^2 g_k^2,
// with the basis rebuilt from sin/cos directly and a fine Simpson quadrature.
double c_strat_quadrature(const NoiseSpectrum& spec, double n)
{
    const double L = spec.length();
    const int M = 4096;
    const double h = L / M;
    auto integrand = [&](double x) {
        double s = 0.0;
        for (int k = -spec.truncation(); k <= spec.truncation(); ++k) {
            double g;
            if (k == 0)
                g = 1.0 / std::sqrt(L);
            else if (k > 0)
                g = std::sqrt(2.0 / L) * std::sin(2 * kPi * k * x / L);
            else
                g = std::sqrt(2.0 / L) * std::cos(2 * kPi * k * x / L);
            s += spec.lambda(k) * spec.lambda(k) * g * g;
        }
        return s;
    };
    double acc = integrand(0.0) + integrand(L);
    for (int i = 1; i < M; ++i)
        acc += (i % 2 ? 4.0 : 2.0) * integrand(i * h);
    return 0.5 * (n * n / 4.0) * (acc * h / 3.0) / L;
}

} // namespace

TEST(Basis, PointValues)
{
    EXPECT_DOUBLE_EQ(basis_eval(0, 0.3, 4.0), 0.5);
    EXPECT_EQ(basis_eval(1, 0.0, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(basis_eval(-2, 0.0, 1.0), std::sqrt(2.0));
}

TEST(Basis, AnalyticDerivativesMatchFiniteDifferences)
{
    const double L = 2.3, h = 1e-5;
    for (int k = -4; k <= 4; ++k)
        for (double x : {0.1, 0.77, 1.9}) {
            const double fd1 = (basis_eval(k, x + h, L) - basis_eval(k, x - h, L)) / (2 * h);
            const double fd2 = (basis_dx(k, x + h, L) - basis_dx(k, x - h, L)) / (2 * h);
            EXPECT_NEAR(basis_dx(k, x, L), fd1, 1e-6 * (1 + std::abs(fd1)));
            EXPECT_NEAR(basis_dxx(k, x, L), fd2, 1e-6 * (1 + std::abs(fd2)));
        }
}

TEST(Basis, DiscreteOrthonormality)
{
    const PeriodicGrid g(1.0, 128);
    const int K = 8;
    double worst = 0.0;
    for (int k = -K; k <= K; ++k)
        for (int l = -K; l <= K; ++l) {
            GridFunction p(g);
            for (int i = 0; i < g.size(); ++i)
                p[i] = basis_eval(k, g.node(i), 1.0) * basis_eval(l, g.node(i), 1.0);
            worst = std::max(worst, std::abs(integrate(p) - (k == l ? 1.0 : 0.0)));
        }
    EXPECT_LE(worst, 1e-12);
}

TEST(Spectrum, Families)
{
    const NoiseSpectrum single = build_spectrum(SpectrumMode::single, 1.0, 0.0, 0, 1.0);
    EXPECT_EQ(single.lambda(0), 1.0);
    EXPECT_EQ(single.colored_sum(), 0.0);
    EXPECT_EQ(single.mode_count(), 1);

    const NoiseSpectrum pd = build_spectrum(SpectrumMode::power_decay, 1.0, 3.0, 4, 1.0);
    EXPECT_DOUBLE_EQ(pd.lambda(2), 0.125);
    EXPECT_DOUBLE_EQ(pd.lambda(-2), 0.125);
    EXPECT_THROW(build_spectrum(SpectrumMode::power_decay, 1.0, 2.0, 4, 1.0), DecayTooWeak);
    EXPECT_THROW(build_spectrum(SpectrumMode::power_decay, 1.0, 2.5, 4, 1.0), DecayTooWeak);

    const NoiseSpectrum flat = build_spectrum(SpectrumMode::flat, 0.5, 0.0, 3, 1.0);
    for (int k = -3; k <= 3; ++k)
        EXPECT_EQ(flat.lambda(k), 0.5);
    EXPECT_DOUBLE_EQ(flat.colored_sum(), 0.25 * 2 * (1 + 16 + 81));
}

TEST(Spectrum, RejectsAsymmetricOrNegative)
{
    EXPECT_THROW(NoiseSpectrum(1, 1.0, {0.1, 1.0, 0.2}), InvalidArgument);
    EXPECT_THROW(NoiseSpectrum(1, 1.0, {-0.1, 1.0, -0.1}), InvalidArgument);
    EXPECT_THROW(NoiseSpectrum(1, 1.0, {1.0, 1.0}), InvalidArgument);
    EXPECT_EQ(parse_spectrum_mode("power-decay"), SpectrumMode::power_decay);
    EXPECT_THROW(parse_spectrum_mode("pink"), InvalidArgument);
}

TEST(Spectrum, SymmetryAcrossRandomParameters)
{
    for (int K = 0; K <= 8; ++K)
        for (double decay : {2.6, 3.0, 4.5})
            for (SpectrumMode m : {SpectrumMode::single, SpectrumMode::flat, SpectrumMode::power_decay}) {
                const NoiseSpectrum s = build_spectrum(m, 0.7, decay, K, 2.0);
                for (int k = 0; k <= K; ++k)
                    EXPECT_EQ(s.lambda(k), s.lambda(-k));
            }
}

TEST(CStrat, ClosedFormAgainstQuadrature)
{
    EXPECT_EQ(c_strat(build_spectrum(SpectrumMode::flat, 0.0, 0.0, 3, 1.0), 2.5), 0.0);

    const NoiseSpectrum single = build_spectrum(SpectrumMode::single, 1.0, 0.0, 0, 1.0);
    EXPECT_DOUBLE_EQ(c_strat(single, 2.5), 0.78125);
    EXPECT_NEAR(c_strat_quadrature(single, 2.5), 0.78125, 1e-13);

    const NoiseSpectrum flat = build_spectrum(SpectrumMode::flat, 1.0, 0.0, 2, 1.0);
    EXPECT_DOUBLE_EQ(c_strat(flat, 2.5), 3.90625);
    EXPECT_NEAR(c_strat_quadrature(flat, 2.5), 3.90625, 1e-12);

    const NoiseSpectrum pd = build_spectrum(SpectrumMode::power_decay, 0.3, 3.0, 8, 2 * kPi);
    EXPECT_NEAR(c_strat(pd, 2.7), c_strat_quadrature(pd, 2.7), 1e-13 * c_strat(pd, 2.7));
}

TEST(CStrat, QuadraticHomogeneity)
{
    const NoiseSpectrum pd = build_spectrum(SpectrumMode::power_decay, 0.37, 3.3, 6, 1.3);
    EXPECT_EQ(c_strat(pd.scaled(2.0), 2.4), 4.0 * c_strat(pd, 2.4));
}

TEST(Thresholds, Values)
{
    const SThresholds t = s_thresholds(2.5, 1.0);
    // Independent evaluation: 3 * 2^{1.5} * 0.5 / 0.5 and (9/4)(1/4)/(0.5*2).
    EXPECT_NEAR(t.S_A3, 3.0 * 2.0 * std::sqrt(2.0), 1e-14);
    EXPECT_NEAR(t.S_A3, 8.4853, 1e-4);
    EXPECT_DOUBLE_EQ(t.S_A3star, 0.5625);
    const SThresholds z = s_thresholds(2.5, 0.0);
    EXPECT_EQ(z.S_A3, 0.0);
    EXPECT_EQ(z.S_A3star, 0.0);
    const SThresholds near2 = s_thresholds(2.0 + 1e-9, 1.0);
    EXPECT_LT(near2.S_A3, 1e-7);
    EXPECT_LT(near2.S_A3star, 1e-7);
    EXPECT_THROW(s_thresholds(3.0, 1.0), MobilityOutOfRange);
    EXPECT_THROW(s_thresholds(1.9, 1.0), MobilityOutOfRange);
}

TEST(Onb, ZeroAndConstantModeSpectra)
{
    const PeriodicGrid g(1.0, 64);
    const OnbReport zero = onb_relation_values(build_spectrum(SpectrumMode::flat, 0.0, 0.0, 3, 1.0), g);
    EXPECT_EQ(zero.max_deviation, 0.0);
    const PeriodicGrid g2(2.0, 64);
    const OnbReport single = onb_relation_values(build_spectrum(SpectrumMode::single, 1.0, 0.0, 0, 2.0), g2);
    EXPECT_DOUBLE_EQ(single.closed_form[0], 0.5);
    for (int r = 1; r < OnbReport::kRelations; ++r)
        EXPECT_EQ(single.closed_form[static_cast<std::size_t>(r)], 0.0);
    EXPECT_LE(single.max_deviation, 1e-15);
}

TEST(Onb, FlatSpectrumRelationsHoldToRoundoff)
{
    const PeriodicGrid g(1.0, 128);
    const OnbReport r = onb_relation_values(build_spectrum(SpectrumMode::flat, 1.0, 0.0, 3, 1.0), g);
    EXPECT_LE(r.max_deviation, 1e-12);
    // Independent closed forms: sum over k=1..3 of 2 k^2 (2 pi)^2 and 2 k^4 (2 pi)^4.
    EXPECT_NEAR(r.closed_form[0], 7.0, 1e-14);
    EXPECT_NEAR(r.closed_form[1], 2.0 * 14.0 * 4.0 * kPi * kPi, 1e-10);
    EXPECT_NEAR(r.closed_form[3], 2.0 * 98.0 * std::pow(2.0 * kPi, 4), 1e-7);
    EXPECT_NEAR(r.closed_form[5], -r.closed_form[1], 0.0);
}

TEST(Onb, TruncationLimit)
{
    const PeriodicGrid g(1.0, 32);
    EXPECT_THROW(onb_relation_values(build_spectrum(SpectrumMode::flat, 1.0, 0.0, 8, 1.0), g), TruncationTooLarge);
    EXPECT_NO_THROW(onb_relation_values(build_spectrum(SpectrumMode::flat, 1.0, 0.0, 7, 1.0), g));
}

TEST(Increments, ShapeDeterminismAndVariance)
{
    const NoiseSpectrum s0 = build_spectrum(SpectrumMode::single, 1.0, 0.0, 0, 1.0);
    RngStream a(5, 1), b(5, 1);
    EXPECT_EQ(sample_increments(s0, 0.01, a).size(), 1u);
    const NoiseSpectrum s4 = build_spectrum(SpectrumMode::flat, 1.0, 0.0, 4, 1.0);
    RngStream c(5, 1, 9), d(5, 1, 9);
    EXPECT_EQ(sample_increments(s4, 0.01, c), sample_increments(s4, 0.01, d));

    const double dt = 0.02;
    RngStream s(123, 0);
    double sum2 = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        const double v = sample_increments(s0, dt, s)[0];
        sum2 += v * v;
    }
    const double var = sum2 / draws;
    EXPECT_GE(var, 0.95 * dt);
    EXPECT_LE(var, 1.05 * dt);
    EXPECT_THROW(sample_increments(s0, 0.0, s), InvalidArgument);
}

TEST(FaceTable, MatchesPointEvaluation)
{
    const PeriodicGrid g(1.7, 32);
    const NoiseSpectrum s = build_spectrum(SpectrumMode::flat, 1.0, 0.0, 3, 1.7);
    const auto t = face_basis_table(s, g);
    for (int k = -3; k <= 3; ++k)
        for (int j = 0; j < g.size(); ++j)
            EXPECT_EQ(t[static_cast<std::size_t>((k + 3) * 32 + j)], basis_eval(k, g.face(j), 1.7));
}
