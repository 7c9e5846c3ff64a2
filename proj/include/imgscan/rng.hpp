#pragma once

#include <cstdint>
#include <vector>

namespace imgscan {

// Deterministic RNG with a pinned algorithm so that seeded shuffles are
// reproducible across platforms and standard library versions
// (std::shuffle / uniform_int_distribution are implementation-defined).
class SeededRng {
  public:
    explicit SeededRng(uint64_t seed) : state_(seed + 0x9e3779b97f4a7c15ULL) {}

    uint64_t next() {
        // splitmix64
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Unbiased draw in [0, bound) via rejection sampling.
    uint64_t next_below(uint64_t bound) {
        if (bound <= 1) return 0;
        uint64_t limit = ~uint64_t{0} - ~uint64_t{0} % bound;
        uint64_t v;
        do {
            v = next();
        } while (v >= limit);
        return v % bound;
    }

  private:
    uint64_t state_;
};

template <typename T>
void seeded_shuffle(std::vector<T>& items, uint64_t seed) {
    SeededRng rng(seed);
    for (size_t i = items.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.next_below(i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

}  // namespace imgscan
