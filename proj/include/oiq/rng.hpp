#pragma once

#include <cmath>
#include <cstdint>

namespace oiq {

// Philox4x32-10 counter-based generator; one stream per replication so
// seedful runs are bit-reproducible regardless of scheduling.
class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    std::uint32_t next_u32() {
        if (have_ == 0) {
            block(ctr_++, out_);
            have_ = 4;
        }
        return out_[4 - have_--];
    }

    // uniform in [2^-54, 1): safe under log
    double next_unit() {
        std::uint64_t hi = next_u32();
        std::uint64_t x = (hi << 32) | next_u32();
        return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
    }

    double exponential(double rate) { return -std::log(next_unit()) / rate; }

    // raw block access for the known-answer tests
    static void philox4x32(const std::uint32_t ctr[4], const std::uint32_t key[2],
                           std::uint32_t out[4]) {
        std::uint32_t x0 = ctr[0], x1 = ctr[1], x2 = ctr[2], x3 = ctr[3];
        std::uint32_t k0 = key[0], k1 = key[1];
        for (int round = 0; round < 10; round++) {
            std::uint64_t p0 = std::uint64_t(0xD2511F53u) * x0;
            std::uint64_t p1 = std::uint64_t(0xCD9E8D57u) * x2;
            std::uint32_t y0 = std::uint32_t(p1 >> 32) ^ x1 ^ k0;
            std::uint32_t y1 = std::uint32_t(p1);
            std::uint32_t y2 = std::uint32_t(p0 >> 32) ^ x3 ^ k1;
            std::uint32_t y3 = std::uint32_t(p0);
            x0 = y0;
            x1 = y1;
            x2 = y2;
            x3 = y3;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        out[0] = x0;
        out[1] = x1;
        out[2] = x2;
        out[3] = x3;
    }

private:
    void block(std::uint64_t n, std::uint32_t out[4]) const {
        std::uint32_t ctr[4] = {std::uint32_t(n), std::uint32_t(n >> 32), std::uint32_t(stream_),
                                std::uint32_t(stream_ >> 32)};
        std::uint32_t key[2] = {std::uint32_t(seed_), std::uint32_t(seed_ >> 32)};
        philox4x32(ctr, key, out);
    }

    std::uint64_t seed_, stream_;
    std::uint64_t ctr_ = 0;
    std::uint32_t out_[4] = {};
    int have_ = 0;
};

}  // namespace oiq
