#include "stf/rng.hpp"

#include "stf/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace stf {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo)
{
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

// 53-bit uniform on (0, 1].
inline double to_unit(std::uint32_t hi, std::uint32_t lo)
{
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

} // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                          std::array<std::uint32_t, 2> key)
{
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

std::array<std::uint32_t, 4> RngStream::block(std::uint32_t index, StreamPurpose purpose) const
{
    const std::array<std::uint32_t, 4> ctr{index, counter_, trajectory_id_,
                                           static_cast<std::uint32_t>(purpose)};
    const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(base_seed_),
                                           static_cast<std::uint32_t>(base_seed_ >> 32)};
    return philox4x32_10(ctr, key);
}

void RngStream::uniforms(std::span<double> out, StreamPurpose purpose)
{
    if (counter_ == std::numeric_limits<std::uint32_t>::max())
        throw Error("RngStream: counter exhausted");
    std::size_t k = 0;
    for (std::uint32_t b = 0; k < out.size(); ++b) {
        const auto r = block(b, purpose);
        out[k++] = to_unit(r[0], r[1]);
        if (k < out.size())
            out[k++] = to_unit(r[2], r[3]);
    }
    ++counter_;
}

void RngStream::normals(std::span<double> out, StreamPurpose purpose)
{
    if (counter_ == std::numeric_limits<std::uint32_t>::max())
        throw Error("RngStream: counter exhausted");
    // Box-Muller on consecutive uniform pairs.
    std::size_t k = 0;
    for (std::uint32_t b = 0; k < out.size(); ++b) {
        const auto r = block(b, purpose);
        const double u1 = to_unit(r[0], r[1]);
        const double u2 = to_unit(r[2], r[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        out[k++] = radius * std::cos(angle);
        if (k < out.size())
            out[k++] = radius * std::sin(angle);
    }
    ++counter_;
}

} // namespace stf
