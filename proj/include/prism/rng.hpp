#pragma once
// Deterministic rng used everywhere sampling happens. mt19937_64 has a
// standardized output sequence, and the bounded draw below avoids the
// implementation-defined std::uniform_int_distribution, so equal seeds give
// equal samples on every platform. The algorithm id is recorded in run
// metadata.

#include <cstdint>
#include <random>
#include <vector>

#include "prism/errors.hpp"

namespace prism {

class Rng {
public:
    static constexpr const char* kAlgorithm = "mt19937_64";

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Unbiased draw in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        require(n > 0, "Rng::below needs n > 0");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return r % n;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Uniform sample without replacement via partial Fisher-Yates.
    // Returns min(n, pool.size()) elements.
    template <class T>
    std::vector<T> sample(const std::vector<T>& pool, std::size_t n) {
        std::vector<std::size_t> idx(pool.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        const std::size_t take = std::min(n, pool.size());
        for (std::size_t i = 0; i < take; ++i) {
            std::size_t j = i + static_cast<std::size_t>(below(idx.size() - i));
            std::swap(idx[i], idx[j]);
        }
        std::vector<T> out;
        out.reserve(take);
        for (std::size_t i = 0; i < take; ++i) out.push_back(pool[idx[i]]);
        return out;
    }

private:
    std::mt19937_64 engine_;
};

} // namespace prism
