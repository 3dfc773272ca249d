#pragma once

// Uniform periodic 1-D grid on [0, L) and the discrete calculus used by every
// other module: central difference stencils, rectangle-rule quadrature and
// pointwise powers.

#include <cstddef>
#include <span>
#include <vector>

namespace stf {

class PeriodicGrid {
public:
    /// Throws InvalidArgument unless L > 0, N even and N >= 16.
    PeriodicGrid(double L, int N);

    double length() const { return L_; }
    int size() const { return N_; }
    double dx() const { return dx_; }

    /// Node coordinate x_i = i*dx; i is taken modulo N.
    double node(int i) const;
    /// Face coordinate x_{i+1/2}.
    double face(int i) const;
    /// Index arithmetic modulo N (handles negative offsets).
    int wrap(int i) const
    {
        const int r = i % N_;
        return r < 0 ? r + N_ : r;
    }

    bool operator==(const PeriodicGrid&) const = default;

private:
    double L_;
    int N_;
    double dx_;
};

PeriodicGrid make_grid(double L, int N);

/// Nodal samples of a periodic field.
class GridFunction {
public:
    explicit GridFunction(const PeriodicGrid& grid, double fill = 0.0);
    GridFunction(const PeriodicGrid& grid, std::vector<double> values);

    template <class F>
    static GridFunction sample(const PeriodicGrid& grid, F&& f)
    {
        std::vector<double> v(static_cast<std::size_t>(grid.size()));
        for (int i = 0; i < grid.size(); ++i)
            v[static_cast<std::size_t>(i)] = f(grid.node(i));
        return GridFunction(grid, std::move(v));
    }

    const PeriodicGrid& grid() const { return grid_; }
    int size() const { return grid_.size(); }

    double operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }
    double& operator[](int i) { return values_[static_cast<std::size_t>(i)]; }
    /// Periodic access.
    double at(int i) const { return values_[static_cast<std::size_t>(grid_.wrap(i))]; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    const std::vector<double>& vector() const { return values_; }

    double min() const;
    double max() const;
    bool all_finite() const;

    /// Cyclic rotation: result[i] = (*this)[i + shift].
    GridFunction rotated(int shift) const;

    GridFunction& operator+=(const GridFunction& o);
    GridFunction& operator-=(const GridFunction& o);
    GridFunction& operator*=(double s);

private:
    PeriodicGrid grid_;
    std::vector<double> values_;
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(GridFunction a, double s);
GridFunction operator*(double s, GridFunction a);
/// Pointwise product.
GridFunction hadamard(const GridFunction& a, const GridFunction& b);

/// Second-order central differences with periodic wraparound, order m in {1,2,3}.
/// The m = 3 stencil approximates +d^3/dx^3.
GridFunction deriv(const GridFunction& f, int m);

/// Forward (face) difference (f_{i+1} - f_i)/dx, value i living at x_{i+1/2}.
GridFunction face_gradient(const GridFunction& f);

/// Order-independent sum: values are accumulated in sorted order, so any
/// permutation of the input (e.g. a periodic rotation) gives the same bits.
double canonical_sum(std::span<const double> values);

/// Rectangle rule sum f_i * dx, accumulated with canonical_sum.
double integrate(const GridFunction& f);
double integrate(std::span<const double> values, double dx);

/// Elementwise f_i^a. Throws NegativeBase when a is non-integer and some f_i <= 0.
GridFunction pointwise_power(const GridFunction& f, double a);

bool is_integer_exponent(double a);

} // namespace stf
