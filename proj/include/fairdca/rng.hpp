#pragma once

#include <cstdint>

namespace fairdca {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A (seed,
// stream) pair selects an independent sequence, and identical inputs produce
// identical draws on every platform, which is what makes bootstrap replicates
// reproducible regardless of how many worker threads execute them.
//
// The 128-bit counter is laid out as (block, stream); the 64-bit seed is the
// key. This generator is the single source of randomness in the toolkit.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    double uniform01();    // [0, 1), 53-bit resolution
    double uniform_pos();  // (0, 1]
    double normal();       // standard normal via Box-Muller
    bool bernoulli(double p);

    // Unbiased uniform integer in [0, n), rejection sampled.
    std::uint64_t below(std::uint64_t n);

private:
    void refill();

    std::uint32_t key_[2];
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::uint32_t buf_[4] = {0, 0, 0, 0};
    int pos_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fairdca
