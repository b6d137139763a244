#pragma once
// Deterministic random streams. std::mt19937_64 gives a specified bit
// sequence, but the std distributions do not, so the bounded/real draws
// are derived here directly. Sub-streams come from splitmix64 so that
// per-tree / per-shard generators are independent of call order.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace citeaudit::rng {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Derives a child seed; mixing the index keeps sibling streams decorrelated.
inline uint64_t derive_seed(uint64_t seed, uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 0x51ED27F4C3D5A2B1ull));
}

// Named sub-stream: the label is hashed (FNV-1a), so call sites can say what
// the stream is for without coordinating index numbers.
inline uint64_t derive_seed(uint64_t seed, std::string_view label) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return derive_seed(seed, h);
}

class Stream {
  public:
    explicit Stream(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // unbiased bounded draw via rejection
    uint64_t below(uint64_t n) {
        if (n <= 1) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = eng_();
        } while (v >= limit);
        return v % n;
    }

    size_t index_below(size_t n) { return static_cast<size_t>(below(n)); }

    // uniform in [0,1) with 53 bits
    double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    int int_between(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    bool bernoulli(double p) { return unit() < p; }

    // Box-Muller; deterministic given the stream state
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0, u2 = 0.0;
        do {
            u1 = unit();
        } while (u1 <= 1e-300);
        u2 = unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = index_below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace citeaudit::rng
