#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace stf {

/// Philox4x32-10 block function (Salmon et al., SC'11). Pure: the output is a
/// function of (counter, key) only, which is what makes streams splittable.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                          std::array<std::uint32_t, 2> key);

/// Independent draw domains inside one trajectory stream.
enum class StreamPurpose : std::uint32_t {
    increments = 0,
    initial_datum = 1,
    test_samples = 2,
};

/// Counter-based random stream identified by (base_seed, trajectory_id).
/// Each draw consumes one counter value; a draw of any length is a pure
/// function of (base_seed, trajectory_id, counter, purpose).
class RngStream {
public:
    RngStream() = default;
    RngStream(std::uint64_t base_seed, std::uint32_t trajectory_id, std::uint32_t counter = 0)
        : base_seed_(base_seed), trajectory_id_(trajectory_id), counter_(counter)
    {
    }

    std::uint64_t base_seed() const { return base_seed_; }
    std::uint32_t trajectory_id() const { return trajectory_id_; }
    std::uint32_t counter() const { return counter_; }

    /// Fills `out` with i.i.d. standard normals for the current counter and
    /// advances the counter by one.
    void normals(std::span<double> out, StreamPurpose purpose = StreamPurpose::increments);
    /// Fills `out` with i.i.d. uniforms on (0, 1] and advances the counter.
    void uniforms(std::span<double> out, StreamPurpose purpose = StreamPurpose::increments);

    bool operator==(const RngStream&) const = default;

private:
    std::array<std::uint32_t, 4> block(std::uint32_t index, StreamPurpose purpose) const;

    std::uint64_t base_seed_ = 0;
    std::uint32_t trajectory_id_ = 0;
    std::uint32_t counter_ = 0;
};

} // namespace stf
