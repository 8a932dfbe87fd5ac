#include "crepe/core/rng.hpp"

#include "crepe/core/errors.hpp"

#include <cmath>
#include <numbers>

namespace crepe {

namespace {
constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}
}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
    for (int r = 0; r < 10; ++r) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kM0, c[0], hi0, lo0);
        mulhilo(kM1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kW0;
        k[1] += kW1;
    }
    return c;
}

RngStream::RngStream(std::uint64_t seed, StreamId id) {
    if (id.level >= (1u << 20)) throw ConfigError("invalid-argument", "rng stream level exceeds 2^20");
    key_ = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    ctr_ = {0u, (static_cast<std::uint32_t>(id.purpose) << 20) | id.level, static_cast<std::uint32_t>(id.iteration),
            static_cast<std::uint32_t>(id.iteration >> 32)};
}

void RngStream::refill() {
    buf_ = philox4x32_10(ctr_, key_);
    ++ctr_[0];
    pos_ = 0;
}

std::uint64_t RngStream::next_u64() {
    if (pos_ > 2) refill();
    const std::uint64_t v = (static_cast<std::uint64_t>(buf_[pos_]) << 32) | buf_[pos_ + 1];
    pos_ += 2;
    return v;
}

double RngStream::uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

double RngStream::normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_normal_;
    }
    const double u1 = uniform(), u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    cached_normal_ = r * std::sin(th);
    has_cached_ = true;
    return r * std::cos(th);
}

void RngStream::fill_normal(Vec& out) {
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normal();
}

int RngStream::categorical(std::span<const double> probs) {
    double total = 0.0;
    for (double p : probs) total += p;
    double u = uniform() * total;
    int last_positive = -1;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        last_positive = static_cast<int>(i);
        if (u < probs[i]) return last_positive;
        u -= probs[i];
    }
    if (last_positive < 0) throw NumericalError("degenerate-kernel", "categorical draw from all-zero probabilities");
    return last_positive;
}

}  // namespace crepe
