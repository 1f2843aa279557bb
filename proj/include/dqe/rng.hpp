#pragma once
// Deterministic random number utilities.
//
// mt19937_64 output is fully specified by the standard; the std
// distribution adapters are not, so the samplers here are hand-rolled.
// Everything a run produces is then a pure function of its seed, on any
// toolchain.

#include <cstdint>
#include <random>
#include <vector>

namespace dqe {

// Mixes a stream id into a seed so independent stages of a pipeline can
// derive non-overlapping sub-seeds from one master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (second value cached).
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer in [0, n) by rejection. n must be > 0.
    std::size_t index(std::size_t n);

    // Knuth's method; fine for the small lambdas used here.
    int poisson(double lambda);

    // Fisher-Yates with this generator (std::shuffle is not portable).
    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.empty()) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = index(i + 1);
            std::swap(v[i], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

}  // namespace dqe
