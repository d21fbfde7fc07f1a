#pragma once

#include <span>
#include <vector>

#include "fracito/fbm.hpp"

namespace fracito {

// Piecewise constant function with coefficient a_i on the cell
// [t_{i-1}, t_i) of a uniform grid; the last cell is closed at T.
class StepFunction {
public:
    StepFunction(TimeGrid grid, std::vector<double> coefficients);

    static StepFunction constant(TimeGrid grid, double c);
    // 1 on [0, t] for a grid time t, zero afterwards.
    static StepFunction indicator_until(TimeGrid grid, double t);

    const TimeGrid& grid() const { return grid_; }
    std::span<const double> coefficients() const { return coefficients_; }
    double coefficient(std::size_t cell) const { return coefficients_[cell]; }

    // Value at time t (right-continuous; t = T maps to the last cell).
    double operator()(double t) const;

    // Same function expressed on a finer grid that refines this one.
    StepFunction on(const TimeGrid& finer) const;

private:
    TimeGrid grid_;
    std::vector<double> coefficients_;
};

}  // namespace fracito
