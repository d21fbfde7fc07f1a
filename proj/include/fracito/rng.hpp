#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace fracito {

// Counter-based stream keyed by (master seed, path index). Every path owns
// its stream, so results never depend on how paths are scheduled.
class PathRng {
public:
    using result_type = std::uint64_t;

    PathRng(std::uint64_t master_seed, std::uint64_t path_index)
        : key_(mix(mix(master_seed ^ 0x6a09e667f3bcc909ULL) + path_index * kGolden)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix(key_ + (++counter_) * kGolden); }

    std::uint64_t key() const { return key_; }

private:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Standard normal draws by the polar method. Implemented here rather than via
// std::normal_distribution so that streams are identical across standard
// libraries.
class NormalSource {
public:
    explicit NormalSource(PathRng rng) : rng_(rng) {}

    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double factor = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * factor;
        has_spare_ = true;
        return u * factor;
    }

    PathRng& engine() { return rng_; }

private:
    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    PathRng rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fracito
