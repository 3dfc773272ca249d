#include "stf/cyclic_banded.hpp"

#include "stf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace stf {

CyclicBandedMatrix::CyclicBandedMatrix(int n)
    : n_(n), bands_(static_cast<std::size_t>(n) * kBands, 0.0)
{
    if (n < 2 * kBands)
        throw InvalidArgument("CyclicBandedMatrix: size must be at least " + std::to_string(2 * kBands));
}

void CyclicBandedMatrix::matvec(std::span<const double> x, std::span<double> y) const
{
    for (int i = 0; i < n_; ++i) {
        double s = 0.0;
        for (int d = -kHalfBandwidth; d <= kHalfBandwidth; ++d) {
            const int c = ((i + d) % n_ + n_) % n_;
            s += coef(i, d) * x[static_cast<std::size_t>(c)];
        }
        y[static_cast<std::size_t>(i)] = s;
    }
}

std::vector<double> CyclicBandedMatrix::dense() const
{
    std::vector<double> a(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_), 0.0);
    for (int i = 0; i < n_; ++i)
        for (int d = -kHalfBandwidth; d <= kHalfBandwidth; ++d) {
            const int c = ((i + d) % n_ + n_) % n_;
            a[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(c)] += coef(i, d);
        }
    return a;
}

BandLU::BandLU(int n, int kl, int ku)
    : n_(n), kl_(kl), ku_(ku), width_(2 * kl + ku + 1),
      a_(static_cast<std::size_t>(n) * static_cast<std::size_t>(2 * kl + ku + 1), 0.0),
      piv_(static_cast<std::size_t>(n), 0)
{
}

// Row interchanges are applied only to the not-yet-eliminated columns, so the
// multipliers stay where they were produced (as in LAPACK's gbtrf); solve()
// replays interchanges and eliminations in the same order.
void BandLU::factor()
{
    const int reach = kl_ + ku_;
    for (int j = 0; j < n_; ++j) {
        const int last_row = std::min(n_ - 1, j + kl_);
        int p = j;
        double best = std::abs(at(j, j));
        for (int r = j + 1; r <= last_row; ++r)
            if (std::abs(at(r, j)) > best) {
                best = std::abs(at(r, j));
                p = r;
            }
        if (best == 0.0)
            throw LinearSolveFailure("band LU: singular pivot in column " + std::to_string(j));
        piv_[static_cast<std::size_t>(j)] = p;
        const int last_col = std::min(n_ - 1, j + reach);
        if (p != j)
            for (int c = j; c <= last_col; ++c)
                std::swap(at(j, c), at(p, c));
        const double pivot = at(j, j);
        for (int r = j + 1; r <= last_row; ++r) {
            const double l = at(r, j) / pivot;
            at(r, j) = l;
            if (l == 0.0)
                continue;
            for (int c = j + 1; c <= last_col; ++c)
                at(r, c) -= l * at(j, c);
        }
    }
}

void BandLU::solve(std::span<double> b) const
{
    const int reach = kl_ + ku_;
    for (int j = 0; j < n_; ++j) {
        const int p = piv_[static_cast<std::size_t>(j)];
        if (p != j)
            std::swap(b[static_cast<std::size_t>(j)], b[static_cast<std::size_t>(p)]);
        const double bj = b[static_cast<std::size_t>(j)];
        const int last_row = std::min(n_ - 1, j + kl_);
        for (int r = j + 1; r <= last_row; ++r)
            b[static_cast<std::size_t>(r)] -= a_[index(r, j)] * bj;
    }
    for (int j = n_ - 1; j >= 0; --j) {
        double s = b[static_cast<std::size_t>(j)];
        const int last_col = std::min(n_ - 1, j + reach);
        for (int c = j + 1; c <= last_col; ++c)
            s -= a_[index(j, c)] * b[static_cast<std::size_t>(c)];
        b[static_cast<std::size_t>(j)] = s / a_[index(j, j)];
    }
}

CyclicBandedSolver::CyclicBandedSolver(const CyclicBandedMatrix& A)
    : A_(A), n_(A.size()), inner_(A.size() - 2),
      lu_(A.size() - 2, CyclicBandedMatrix::kHalfBandwidth, CyclicBandedMatrix::kHalfBandwidth),
      border_cols_(2 * static_cast<std::size_t>(A.size() - 2), 0.0),
      bottom_rows_(2 * static_cast<std::size_t>(A.size() - 2), 0.0)
{
    constexpr int hb = CyclicBandedMatrix::kHalfBandwidth;
    std::array<double, 4> a22{};
    for (int i = 0; i < n_; ++i)
        for (int d = -hb; d <= hb; ++d) {
            const int c = ((i + d) % n_ + n_) % n_;
            const double v = A.coef(i, d);
            if (i < inner_ && c < inner_)
                lu_.at(i, c) += v;
            else if (i < inner_)
                border_cols_[static_cast<std::size_t>(c - inner_) * static_cast<std::size_t>(inner_) +
                             static_cast<std::size_t>(i)] += v;
            else if (c < inner_)
                bottom_rows_[static_cast<std::size_t>(i - inner_) * static_cast<std::size_t>(inner_) +
                             static_cast<std::size_t>(c)] += v;
            else
                a22[static_cast<std::size_t>((i - inner_) * 2 + (c - inner_))] += v;
        }
    lu_.factor();
    for (int col = 0; col < 2; ++col)
        lu_.solve(std::span<double>(border_cols_).subspan(static_cast<std::size_t>(col * inner_),
                                                          static_cast<std::size_t>(inner_)));

    // Schur complement S = A22 - A21 A11^{-1} A12.
    std::array<double, 4> s = a22;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            double acc = 0.0;
            for (int k = 0; k < inner_; ++k)
                acc += bottom_rows_[static_cast<std::size_t>(r * inner_ + k)] *
                       border_cols_[static_cast<std::size_t>(c * inner_ + k)];
            s[static_cast<std::size_t>(r * 2 + c)] -= acc;
        }
    const double det = s[0] * s[3] - s[1] * s[2];
    const double scale = std::max({std::abs(s[0] * s[3]), std::abs(s[1] * s[2]), 1e-300});
    if (!(std::abs(det) > 1e-15 * scale))
        throw LinearSolveFailure("cyclic banded solve: singular border block");
    schur_inv_ = {s[3] / det, -s[1] / det, -s[2] / det, s[0] / det};

    for (int i = 0; i < n_; ++i) {
        double row = 0.0;
        for (int d = -hb; d <= hb; ++d)
            row += std::abs(A.coef(i, d));
        norm_inf_ = std::max(norm_inf_, row);
    }
}

std::vector<double> CyclicBandedSolver::solve_once(std::span<const double> b) const
{
    std::vector<double> x(b.begin(), b.end());
    std::span<double> x1(x.data(), static_cast<std::size_t>(inner_));
    lu_.solve(x1);
    double r2[2];
    for (int r = 0; r < 2; ++r) {
        double acc = b[static_cast<std::size_t>(inner_ + r)];
        for (int k = 0; k < inner_; ++k)
            acc -= bottom_rows_[static_cast<std::size_t>(r * inner_ + k)] * x1[static_cast<std::size_t>(k)];
        r2[r] = acc;
    }
    const double x2[2] = {schur_inv_[0] * r2[0] + schur_inv_[1] * r2[1],
                          schur_inv_[2] * r2[0] + schur_inv_[3] * r2[1]};
    for (int k = 0; k < inner_; ++k)
        x1[static_cast<std::size_t>(k)] -= border_cols_[static_cast<std::size_t>(k)] * x2[0] +
                                           border_cols_[static_cast<std::size_t>(inner_ + k)] * x2[1];
    x[static_cast<std::size_t>(inner_)] = x2[0];
    x[static_cast<std::size_t>(inner_ + 1)] = x2[1];
    return x;
}

double CyclicBandedSolver::residual(std::span<const double> x, std::span<const double> b) const
{
    std::vector<double> ax(static_cast<std::size_t>(n_));
    A_.matvec(x, ax);
    double r = 0.0;
    for (int i = 0; i < n_; ++i)
        r = std::max(r, std::abs(ax[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]));
    return r;
}

std::vector<double> CyclicBandedSolver::solve(std::span<const double> b, double tol, int max_refinements) const
{
    if (b.size() != static_cast<std::size_t>(n_))
        throw InvalidArgument("cyclic banded solve: right-hand side has wrong length");
    double bnorm = 0.0;
    for (double v : b)
        bnorm = std::max(bnorm, std::abs(v));

    std::vector<double> x = solve_once(b);
    std::vector<double> ax(static_cast<std::size_t>(n_));
    std::vector<double> r(static_cast<std::size_t>(n_));
    for (int it = 0;; ++it) {
        A_.matvec(x, ax);
        double rmax = 0.0;
        for (int i = 0; i < n_; ++i) {
            const auto is = static_cast<std::size_t>(i);
            r[is] = b[is] - ax[is];
            rmax = std::max(rmax, std::abs(r[is]));
        }
        if (!std::isfinite(rmax))
            throw LinearSolveFailure("cyclic banded solve: non-finite residual");
        double xnorm = 0.0;
        for (double v : x)
            xnorm = std::max(xnorm, std::abs(v));
        const double target = tol * (norm_inf_ * xnorm + bnorm);
        if (rmax <= target)
            return x;
        if (it >= max_refinements)
            throw LinearSolveFailure("cyclic banded solve: residual " + std::to_string(rmax) +
                                     " above tolerance " + std::to_string(target));
        const std::vector<double> dx = solve_once(r);
        for (int i = 0; i < n_; ++i)
            x[static_cast<std::size_t>(i)] += dx[static_cast<std::size_t>(i)];
    }
}

} // namespace stf
