#include "fracito/step_function.hpp"

#include <cmath>
#include <stdexcept>

namespace fracito {

namespace {

std::size_t cell_of(const TimeGrid& grid, double t) {
    const double x = t / grid.spacing();
    const double r = std::round(x);
    const double k = std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x)) ? r : std::floor(x);
    if (k <= 0.0) return 0;
    return std::min(static_cast<std::size_t>(k), grid.steps() - 1);
}

}  // namespace

StepFunction::StepFunction(TimeGrid grid, std::vector<double> coefficients)
    : grid_(grid), coefficients_(std::move(coefficients)) {
    if (coefficients_.size() != grid_.steps()) {
        throw std::invalid_argument("step function needs one coefficient per grid cell");
    }
    for (double a : coefficients_) {
        if (!std::isfinite(a)) throw std::invalid_argument("step function coefficients must be finite");
    }
}

StepFunction StepFunction::constant(TimeGrid grid, double c) {
    return StepFunction(grid, std::vector<double>(grid.steps(), c));
}

StepFunction StepFunction::indicator_until(TimeGrid grid, double t) {
    const auto k = grid.index_of(t);
    if (!k) throw std::invalid_argument("indicator_until: time is not on the grid");
    std::vector<double> a(grid.steps(), 0.0);
    for (std::size_t i = 0; i < *k; ++i) a[i] = 1.0;
    return StepFunction(grid, std::move(a));
}

double StepFunction::operator()(double t) const {
    if (t < 0.0 || t > grid_.horizon() * (1.0 + 1e-12)) return 0.0;
    return coefficients_[cell_of(grid_, t)];
}

StepFunction StepFunction::on(const TimeGrid& finer) const {
    if (!finer.refines(grid_)) throw std::invalid_argument("StepFunction::on: grid does not refine");
    const std::size_t ratio = finer.steps() / grid_.steps();
    std::vector<double> a(finer.steps());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = coefficients_[i / ratio];
    return StepFunction(finer, std::move(a));
}

}  // namespace fracito
