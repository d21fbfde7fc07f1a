#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fracito/fbm.hpp"
#include "fracito/step_function.hpp"

namespace fracito {

// A path stopped at a grid time: gamma_t restricted to [0, t], read as a
// right-continuous step function of its grid samples. The object is a cheap
// view; vertical bumps and flat horizontal extensions are recorded as
// shifts instead of copying the underlying samples.
class StoppedPath {
public:
    StoppedPath(TimeGrid grid, std::span<const double> values, std::size_t cursor);
    // Owns its samples.
    StoppedPath(TimeGrid grid, std::vector<double> values, std::size_t cursor);

    const TimeGrid& grid() const { return grid_; }
    std::size_t cursor() const { return cursor_; }
    double time() const { return grid_.time(cursor_); }

    // Sample at grid index i <= cursor().
    double at(std::size_t i) const {
        if (i < anchor_) return values_[i];
        double v = values_[anchor_] + flat_shift_;
        if (i == cursor_) v += tip_shift_;
        return v;
    }
    double current() const { return at(cursor_); }

    // True when samples 0..cursor are stored verbatim in samples().
    bool is_plain() const { return anchor_ == cursor_ && flat_shift_ == 0.0 && tip_shift_ == 0.0; }
    std::span<const double> samples() const { return values_.first(anchor_ + 1); }

    double sup_norm() const;

    // gamma_t^h: the value at the cursor moved by h.
    StoppedPath bumped(double h) const;
    // gamma_{t,s}: cursor moved to grid index s >= cursor, flat in between.
    StoppedPath extended(std::size_t s) const;
    // Copy of samples 0..cursor as a plain owned path.
    StoppedPath materialized() const;
    // Same step function sampled on a grid with `factor` times more points.
    StoppedPath upsampled(std::size_t factor) const;

private:
    TimeGrid grid_;
    std::shared_ptr<const std::vector<double>> owned_;
    std::span<const double> values_;
    std::size_t cursor_;
    std::size_t anchor_;
    double flat_shift_ = 0.0;
    double tip_shift_ = 0.0;
};

StoppedPath vertical_bump(const StoppedPath& path, double h);
StoppedPath horizontal_extend(const StoppedPath& path, double s);

// d_inf(a, b) = sup |a_{t,s} - b_s| + |t - s| for t <= s (arguments may come in
// either order). The grids must share a horizon and one must refine the other.
double d_infty(const StoppedPath& a, const StoppedPath& b);

enum class Quantity { value, horizontal, vertical, vertical2 };
enum class Smoothness { C00, C11, C12 };

std::string to_string(Quantity q);
std::string to_string(Smoothness s);

// A non-anticipative map from stopped paths to the reals, optionally with
// closed-form horizontal and vertical derivatives.
class Functional {
public:
    virtual ~Functional() = default;

    virtual std::string name() const = 0;
    virtual Smoothness smoothness() const = 0;
    virtual double value(const StoppedPath& path) const = 0;

    virtual bool has_closed_form(Quantity q) const { return q == Quantity::value; }
    // Throws std::logic_error when no closed form exists.
    virtual double closed_form(Quantity q, const StoppedPath& path) const;

    // out[k] = quantity q at the prefix stopped at index k, for every k of a
    // plain sample vector. Builtins override this with O(n) recurrences.
    virtual void sweep(Quantity q, const TimeGrid& grid, std::span<const double> values,
                       std::span<double> out) const;
};

using FunctionalPtr = std::shared_ptr<const Functional>;

enum class Scheme { closed_form, forward, central };

std::string to_string(Scheme s);

struct DerivativeEstimate {
    double value = 0.0;
    double bump = 0.0;
    Scheme scheme = Scheme::closed_form;
};

DerivativeEstimate horizontal_derivative(const Functional& f, const StoppedPath& path);
DerivativeEstimate vertical_derivative(const Functional& f, const StoppedPath& path,
                                       std::optional<double> bump = std::nullopt);
DerivativeEstimate vertical_second(const Functional& f, const StoppedPath& path,
                                   std::optional<double> bump = std::nullopt);

// Default relative bump for vertical finite differences.
inline constexpr double kVerticalRelativeBump = 1e-4;

// Quantity q along every prefix of `values`: closed-form sweep when available,
// finite differences otherwise.
void sweep_quantity(const Functional& f, Quantity q, const TimeGrid& grid, std::span<const double> values,
                    std::span<double> out);
std::vector<double> sweep_quantity(const Functional& f, Quantity q, const TimeGrid& grid,
                                   std::span<const double> values);

// ------------------------------------------------------------ builtins

// f(t, gamma(t)) with optional partial derivatives in t, x and xx.
struct CylindricalSpec {
    std::string name;
    std::function<double(double, double)> f;
    std::function<double(double, double)> f_t;
    std::function<double(double, double)> f_x;
    std::function<double(double, double)> f_xx;
};

FunctionalPtr cylindrical(CylindricalSpec spec);
FunctionalPtr constant(double c);
FunctionalPtr identity();                  // gamma(t)
FunctionalPtr square();                    // gamma(t)^2
FunctionalPtr running_integral();          // int_0^t gamma(s) ds, left-point cells
FunctionalPtr weighted_integral(StepFunction xi);  // int_0^t xi(s) dgamma(s)
FunctionalPtr running_max();               // max_{s <= t} gamma(s)
FunctionalPtr product_integral();          // gamma(t) * int_0^t gamma(s) ds

// sum_i c_i F_i. Closed forms exist for a quantity when every term has one.
FunctionalPtr linear_combination(std::vector<FunctionalPtr> terms, std::vector<double> coefficients);

// The functional gamma_t -> Delta_q F(gamma_t). Its vertical derivative is the
// next vertical derivative of F. Only horizontal/vertical/vertical2 sources.
FunctionalPtr derivative_functional(FunctionalPtr f, Quantity q);

}  // namespace fracito
