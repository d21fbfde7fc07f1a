#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "fracito/fbm.hpp"
#include "fracito/rng.hpp"

namespace testing_support {

// Hand-rolled generators for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : normals_(fracito::PathRng(seed, 0xfeed)) {}

    double uniform() { return static_cast<double>(normals_.engine()() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }
    double normal() { return normals_(); }

    // Random walk with N(0, scale^2) steps, starting at 0.
    std::vector<double> walk(std::size_t points, double scale = 0.1) {
        std::vector<double> v(points, 0.0);
        for (std::size_t i = 1; i < points; ++i) v[i] = v[i - 1] + scale * normal();
        return v;
    }

    std::vector<double> vector(std::size_t n, double a = -1.0, double b = 1.0) {
        std::vector<double> v(n);
        for (auto& x : v) x = uniform(a, b);
        return v;
    }

private:
    fracito::NormalSource normals_;
};

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe mean_se(std::span<const double> v) {
    const double m = static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += x;
    const double mean = s / m;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (m - 1.0) / m)};
}

// Sample variance with the standard error of the sample variance.
inline MeanSe variance_se(std::span<const double> v) {
    const auto m = mean_se(v);
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - m.mean) * (v[i] - m.mean);
    const auto s = mean_se(sq);
    const double n = static_cast<double>(v.size());
    return {s.mean * n / (n - 1.0), s.se};
}

inline bool within_se(double value, double target, double se, double k = 4.0) {
    return std::abs(value - target) <= k * se;
}

}  // namespace testing_support
