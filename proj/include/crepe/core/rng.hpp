#pragma once

#include "crepe/core/types.hpp"

#include <array>
#include <cstdint>
#include <span>

namespace crepe {

enum class Purpose : std::uint32_t {
    init = 1,
    forward_path = 2,
    backward_path = 3,
    swap_accept = 4,
    local_move = 5,
    top_resample = 6,
    completion = 7,
    smc_propagate = 8,
    smc_resample = 9,
    smc_init = 10,
    test = 11,
};

struct StreamId {
    std::uint32_t level = 0;       // < 2^20
    std::uint64_t iteration = 0;
    Purpose purpose = Purpose::test;
};

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);

// Counter-based stream: (seed, stream id) fixes the whole draw sequence.
class RngStream {
public:
    RngStream(std::uint64_t seed, StreamId id);

    std::uint64_t next_u64();
    double uniform();  // open interval (0, 1)
    double normal();
    void fill_normal(Vec& out);
    int categorical(std::span<const double> probs);  // probs need not be normalized

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> ctr_;
    std::array<std::uint32_t, 4> buf_{};
    int pos_ = 4;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace crepe
