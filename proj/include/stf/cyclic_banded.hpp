#pragma once

// Direct solver for periodic (cyclic) banded systems with half-bandwidth 2.
//
// The last two unknowns are split off as a border: the leading (N-2)x(N-2)
// block is an ordinary band matrix (no wraparound) factored with partial
// pivoting, and the 2x2 Schur complement closes the system.

#include <array>
#include <span>
#include <vector>

namespace stf {

/// Square N x N matrix whose row i has entries in columns i-2..i+2 (mod N).
class CyclicBandedMatrix {
public:
    static constexpr int kHalfBandwidth = 2;
    static constexpr int kBands = 2 * kHalfBandwidth + 1;

    explicit CyclicBandedMatrix(int n);

    int size() const { return n_; }
    /// Coefficient of x_{i+offset} in row i, offset in [-2, 2].
    double& coef(int row, int offset) { return bands_[index(row, offset)]; }
    double coef(int row, int offset) const { return bands_[index(row, offset)]; }

    void matvec(std::span<const double> x, std::span<double> y) const;
    std::vector<double> dense() const;

private:
    std::size_t index(int row, int offset) const
    {
        return static_cast<std::size_t>(row) * kBands + static_cast<std::size_t>(offset + kHalfBandwidth);
    }

    int n_;
    std::vector<double> bands_;
};

/// LU factorization with partial pivoting of a non-periodic band matrix.
class BandLU {
public:
    BandLU(int n, int kl, int ku);

    int size() const { return n_; }
    /// Entry (r, c); |c - r| must respect the original bandwidths before factor().
    double& at(int r, int c) { return a_[index(r, c)]; }

    /// Throws LinearSolveFailure on an exactly singular pivot.
    void factor();
    /// In-place solve after factor().
    void solve(std::span<double> b) const;

private:
    std::size_t index(int r, int c) const
    {
        return static_cast<std::size_t>(r) * width_ + static_cast<std::size_t>(c - r + kl_);
    }

    int n_;
    int kl_;
    int ku_;
    int width_;
    std::vector<double> a_;
    std::vector<int> piv_;
};

class CyclicBandedSolver {
public:
    explicit CyclicBandedSolver(const CyclicBandedMatrix& A);

    /// Direct solve followed by up to `max_refinements` steps of iterative
    /// refinement until the normwise backward error is small:
    /// ||A x - b||_inf <= tol * (||A||_inf ||x||_inf + ||b||_inf).
    /// Throws LinearSolveFailure when the tolerance is not met.
    std::vector<double> solve(std::span<const double> b, double tol = 1e-12, int max_refinements = 3) const;

    /// ||A x - b||_inf.
    double residual(std::span<const double> x, std::span<const double> b) const;

private:
    std::vector<double> solve_once(std::span<const double> b) const;

    const CyclicBandedMatrix& A_;
    int n_;
    int inner_;
    BandLU lu_;
    std::vector<double> border_cols_; // A11^{-1} A12, two columns of length inner_
    std::vector<double> bottom_rows_; // A21, two rows of length inner_
    std::array<double, 4> schur_inv_{};
    double norm_inf_ = 0.0;
};

} // namespace stf
