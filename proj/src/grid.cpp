#include "stf/grid.hpp"

#include "stf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace stf {

PeriodicGrid::PeriodicGrid(double L, int N)
    : L_(L), N_(N), dx_(0.0)
{
    if (!(L > 0.0) || !std::isfinite(L))
        throw InvalidArgument("grid length L must be positive and finite");
    if (N % 2 != 0)
        throw InvalidArgument("N must be even");
    if (N < 16)
        throw InvalidArgument("N must be >= 16");
    dx_ = L / static_cast<double>(N);
}

double PeriodicGrid::node(int i) const
{
    return static_cast<double>(wrap(i)) * dx_;
}

double PeriodicGrid::face(int i) const
{
    return (static_cast<double>(wrap(i)) + 0.5) * dx_;
}

PeriodicGrid make_grid(double L, int N)
{
    return PeriodicGrid(L, N);
}

GridFunction::GridFunction(const PeriodicGrid& grid, double fill)
    : grid_(grid), values_(static_cast<std::size_t>(grid.size()), fill)
{
}

GridFunction::GridFunction(const PeriodicGrid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values))
{
    if (values_.size() != static_cast<std::size_t>(grid_.size()))
        throw InvalidArgument("GridFunction: value count " + std::to_string(values_.size()) +
                              " does not match grid size " + std::to_string(grid_.size()));
}

double GridFunction::min() const
{
    return *std::min_element(values_.begin(), values_.end());
}

double GridFunction::max() const
{
    return *std::max_element(values_.begin(), values_.end());
}

bool GridFunction::all_finite() const
{
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

GridFunction GridFunction::rotated(int shift) const
{
    GridFunction out(grid_);
    for (int i = 0; i < size(); ++i)
        out[i] = at(i + shift);
    return out;
}

GridFunction& GridFunction::operator+=(const GridFunction& o)
{
    for (std::size_t i = 0; i < values_.size(); ++i)
        values_[i] += o.values_[i];
    return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& o)
{
    for (std::size_t i = 0; i < values_.size(); ++i)
        values_[i] -= o.values_[i];
    return *this;
}

GridFunction& GridFunction::operator*=(double s)
{
    for (double& v : values_)
        v *= s;
    return *this;
}

GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(GridFunction a, double s) { return a *= s; }
GridFunction operator*(double s, GridFunction a) { return a *= s; }

GridFunction hadamard(const GridFunction& a, const GridFunction& b)
{
    GridFunction out(a.grid());
    for (int i = 0; i < a.size(); ++i)
        out[i] = a[i] * b[i];
    return out;
}

GridFunction deriv(const GridFunction& f, int m)
{
    const PeriodicGrid& g = f.grid();
    const double h = g.dx();
    GridFunction out(g);
    switch (m) {
    case 1:
        for (int i = 0; i < g.size(); ++i)
            out[i] = (f.at(i + 1) - f.at(i - 1)) / (2.0 * h);
        break;
    case 2:
        for (int i = 0; i < g.size(); ++i)
            out[i] = (f.at(i + 1) - 2.0 * f[i] + f.at(i - 1)) / (h * h);
        break;
    case 3:
        for (int i = 0; i < g.size(); ++i)
            out[i] = (-0.5 * f.at(i - 2) + f.at(i - 1) - f.at(i + 1) + 0.5 * f.at(i + 2)) / (h * h * h);
        break;
    default:
        throw InvalidArgument("deriv: order must be 1, 2 or 3");
    }
    return out;
}

GridFunction face_gradient(const GridFunction& f)
{
    const PeriodicGrid& g = f.grid();
    GridFunction out(g);
    for (int i = 0; i < g.size(); ++i)
        out[i] = (f.at(i + 1) - f[i]) / g.dx();
    return out;
}

double canonical_sum(std::span<const double> values)
{
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    double s = 0.0;
    for (double v : sorted)
        s += v;
    return s;
}

double integrate(std::span<const double> values, double dx)
{
    return canonical_sum(values) * dx;
}

double integrate(const GridFunction& f)
{
    return integrate(f.values(), f.grid().dx());
}

bool is_integer_exponent(double a)
{
    return std::isfinite(a) && a == std::floor(a);
}

GridFunction pointwise_power(const GridFunction& f, double a)
{
    const bool integral = is_integer_exponent(a);
    GridFunction out(f.grid());
    for (int i = 0; i < f.size(); ++i) {
        const double v = f[i];
        if (!integral && v <= 0.0)
            throw NegativeBase("pointwise_power: non-integer exponent " + std::to_string(a) +
                               " applied to non-positive value " + std::to_string(v) +
                               " at node " + std::to_string(i));
        if (a < 0.0 && v == 0.0)
            throw NegativeBase("pointwise_power: negative exponent applied to zero at node " +
                               std::to_string(i));
        out[i] = std::pow(v, a);
    }
    return out;
}

} // namespace stf
