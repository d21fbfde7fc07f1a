#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracito/rng.hpp"

namespace fracito {

// Raised when a factorization or embedding cannot be carried out in floating
// point.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Hurst exponent of the driving noise. Admits (1/2, 1); exactly 1/2 is the
// Brownian special case and is reported by is_brownian().
class HurstParameter {
public:
    explicit HurstParameter(double h);

    double value() const { return h_; }
    bool is_brownian() const { return h_ == 0.5; }
    bool operator==(const HurstParameter&) const = default;

private:
    double h_;
};

// Uniform partition t_i = i T / n of [0, T].
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t steps);

    double horizon() const { return horizon_; }
    std::size_t steps() const { return steps_; }
    std::size_t points() const { return steps_ + 1; }
    double spacing() const { return horizon_ / static_cast<double>(steps_); }

    double time(std::size_t i) const {
        return i >= steps_ ? horizon_ : horizon_ * static_cast<double>(i) / static_cast<double>(steps_);
    }

    // Grid with `factor` times as many steps on the same horizon.
    TimeGrid refined(std::size_t factor = 2) const { return TimeGrid(horizon_, steps_ * factor); }

    // Index of a grid time, if `t` lies on the grid up to a relative tolerance.
    std::optional<std::size_t> index_of(double t, double tol = 1e-12) const;

    // True when every point of `coarse` is a point of this grid.
    bool refines(const TimeGrid& coarse) const;

    bool operator==(const TimeGrid&) const = default;

private:
    double horizon_;
    std::size_t steps_;
};

struct FbmPath {
    TimeGrid grid;
    std::vector<double> values;  // length grid.points(), values[0] == 0
    HurstParameter hurst;
    std::uint64_t seed_tag = 0;
};

// Cov(B(s), B(t)) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2.
double covariance(double s, double t, HurstParameter h);

// Autocovariance of unit-lag increments on a grid with spacing dt:
// (|k+1|^{2H} + |k-1|^{2H} - 2|k|^{2H}) dt^{2H} / 2.
double increment_autocovariance(std::size_t lag, double dt, HurstParameter h);

// Sum of squared increments.
double quadratic_variation(std::span<const double> values);

enum class GeneratorKind { cholesky, circulant };

std::string to_string(GeneratorKind kind);

// Exact sampler of fBm on a fixed grid. Instances are immutable after
// construction and may be shared between threads; randomness comes only from
// the per-path stream handed to sample_into.
class FbmGenerator {
public:
    virtual ~FbmGenerator() = default;

    virtual GeneratorKind kind() const = 0;
    const TimeGrid& grid() const { return grid_; }
    HurstParameter hurst() const { return hurst_; }

    // Writes grid().points() values into out, out[0] = 0.
    virtual void sample_into(NormalSource& normals, std::span<double> out) const = 0;

    FbmPath sample(std::uint64_t master_seed, std::uint64_t path_index) const;

protected:
    FbmGenerator(TimeGrid grid, HurstParameter hurst) : grid_(grid), hurst_(hurst) {}

private:
    TimeGrid grid_;
    HurstParameter hurst_;
};

// Cholesky factor of the increment covariance. O(n^3) setup, O(n^2) per path.
// Factors are cached per (grid, hurst) for the lifetime of the process.
class CholeskyGenerator final : public FbmGenerator {
public:
    static constexpr std::size_t kDefaultMaxSteps = 2048;

    CholeskyGenerator(TimeGrid grid, HurstParameter hurst, std::size_t max_steps = kDefaultMaxSteps);

    GeneratorKind kind() const override { return GeneratorKind::cholesky; }
    void sample_into(NormalSource& normals, std::span<double> out) const override;

private:
    struct Factor;
    std::shared_ptr<const Factor> factor_;
};

// Davies-Harte circulant embedding of the stationary increment sequence.
// O(n log n) setup and per path.
class CirculantGenerator final : public FbmGenerator {
public:
    CirculantGenerator(TimeGrid grid, HurstParameter hurst, double eigenvalue_tolerance = 1e-10);

    GeneratorKind kind() const override { return GeneratorKind::circulant; }
    void sample_into(NormalSource& normals, std::span<double> out) const override;

    // Smallest eigenvalue of the embedding before clipping at zero.
    double min_eigenvalue() const { return min_eigenvalue_; }

private:
    std::vector<double> scale_;  // sqrt(lambda_k / m)
    double min_eigenvalue_ = 0.0;
};

std::shared_ptr<const FbmGenerator> make_generator(TimeGrid grid, HurstParameter hurst,
                                                   GeneratorKind kind = GeneratorKind::circulant);

// Exact conditional sampling of the n midpoints of a path given its n+1 grid
// values. Setup is O(n^3) and is cached per (grid, hurst).
class MidpointRefiner {
public:
    static constexpr std::size_t kDefaultMaxSteps = 1024;

    MidpointRefiner(TimeGrid coarse, HurstParameter hurst, std::size_t max_steps = kDefaultMaxSteps);

    const TimeGrid& coarse_grid() const { return coarse_; }

    // Returns 2n+1 values; even entries reproduce `coarse_values`.
    std::vector<double> refine(std::span<const double> coarse_values, NormalSource& normals) const;

private:
    struct Law;
    TimeGrid coarse_;
    HurstParameter hurst_;
    std::shared_ptr<const Law> law_;
};

FbmPath refine(const FbmPath& path, std::uint64_t master_seed, std::uint64_t path_index);

// Every `factor`-th value; the coarse view of a path generated on a finer grid.
FbmPath downsample(const FbmPath& path, std::size_t factor);
std::vector<double> downsample(std::span<const double> values, std::size_t factor);

// M paths stored row-major on one grid.
struct PathBundle {
    TimeGrid grid;
    HurstParameter hurst;
    std::size_t count = 0;
    std::uint64_t master_seed = 0;
    std::vector<double> values;

    std::span<const double> row(std::size_t i) const {
        return {values.data() + i * grid.points(), grid.points()};
    }
    std::span<double> row(std::size_t i) {
        return {values.data() + i * grid.points(), grid.points()};
    }
};

PathBundle generate_bundle(const FbmGenerator& generator, std::size_t count, std::uint64_t master_seed,
                           std::size_t workers = 0);

}  // namespace fracito
