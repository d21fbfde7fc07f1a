#include "fracito/integrators.hpp"

#include <cmath>
#include <stdexcept>

#include "fracito/malliavin.hpp"

namespace fracito {

ItoProcessSpec ItoProcessSpec::driver_itself(TimeGrid grid, DriverKind driver, double x0) {
    return {x0, StepFunction::constant(grid, 0.0), StepFunction::constant(grid, 1.0), driver};
}

std::string to_string(IntegralKind kind) {
    switch (kind) {
        case IntegralKind::ito_type: return "ito_type";
        case IntegralKind::stratonovich: return "stratonovich";
        case IntegralKind::wis: return "wis";
    }
    return "?";
}

namespace {

void require_length(std::span<const double> v, std::size_t n, const char* what) {
    if (v.size() != n) throw std::invalid_argument(std::string(what) + ": path length does not match the grid");
}

}  // namespace

IntegralSample ito_type_sum(const Functional& F, const TimeGrid& grid, std::span<const double> driver,
                            std::span<const double> x) {
    require_length(driver, grid.points(), "ito_type_sum");
    require_length(x, grid.points(), "ito_type_sum");
    const auto integrand = sweep_quantity(F, Quantity::value, grid, x);
    double acc = 0.0;
    for (std::size_t i = 1; i < driver.size(); ++i) acc += integrand[i - 1] * (driver[i] - driver[i - 1]);
    return {acc, grid.steps(), IntegralKind::ito_type};
}

IntegralSample stratonovich_sum(const Functional& F, const TimeGrid& grid, std::span<const double> driver_refined,
                                std::span<const double> x_refined, std::span<const double> weights) {
    const TimeGrid fine = grid.refined();
    if (driver_refined.size() != fine.points() || x_refined.size() != fine.points()) {
        throw std::invalid_argument("stratonovich_sum: paths must be sampled on the doubled grid (2n + 1 points)");
    }
    if (!weights.empty() && weights.size() != grid.steps()) {
        throw std::invalid_argument("stratonovich_sum: need one weight per cell");
    }
    const auto integrand = sweep_quantity(F, Quantity::value, fine, x_refined);
    double acc = 0.0;
    for (std::size_t i = 1; i <= grid.steps(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i - 1];
        acc += w * integrand[2 * i - 1] * (driver_refined[2 * i] - driver_refined[2 * i - 2]);
    }
    return {acc, grid.steps(), IntegralKind::stratonovich};
}

std::vector<double> wick_cell_factors(const TimeGrid& grid, HurstParameter hurst) {
    std::vector<double> out(grid.steps());
    for (std::size_t i = 1; i <= grid.steps(); ++i) {
        out[i - 1] = indicator_inner_product(0.0, grid.time(i - 1), grid.time(i - 1), grid.time(i), hurst);
    }
    return out;
}

double wick_correction_sum(std::span<const double> dx, const TimeGrid& grid, HurstParameter hurst,
                           std::size_t first_cell) {
    if (dx.size() < grid.steps()) throw std::invalid_argument("wick_correction_sum: need one derivative per cell");
    double acc = 0.0;
    for (std::size_t i = first_cell + 1; i <= grid.steps(); ++i) {
        acc += wick_correction(dx[i - 1], grid.time(i - 1), grid.time(i), hurst);
    }
    return acc;
}

IntegralSample wis_sum(const Functional& F, const TimeGrid& grid, std::span<const double> driver,
                       HurstParameter hurst) {
    require_length(driver, grid.points(), "wis_sum");
    if (F.smoothness() == Smoothness::C00) {
        throw std::domain_error("wis_sum: " + F.name() + " has no vertical derivative");
    }
    const auto integrand = sweep_quantity(F, Quantity::value, grid, driver);
    const auto dx = sweep_quantity(F, Quantity::vertical, grid, driver);
    const auto factors = wick_cell_factors(grid, hurst);
    double acc = 0.0;
    for (std::size_t i = 1; i < driver.size(); ++i) {
        acc += integrand[i - 1] * (driver[i] - driver[i - 1]) - dx[i - 1] * factors[i - 1];
    }
    return {acc, grid.steps(), IntegralKind::wis};
}

IntegralSample wis_sum(const Functional& F, const FbmPath& path) {
    return wis_sum(F, path.grid, path.values, path.hurst);
}

std::vector<double> build_ito_process(const ItoProcessSpec& spec, const TimeGrid& grid,
                                      std::span<const double> driver) {
    require_length(driver, grid.points(), "build_ito_process");
    std::vector<double> x(grid.points());
    const double dt = grid.spacing();
    x[0] = spec.x0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double t = grid.time(i - 1);
        x[i] = x[i - 1] + spec.psi(t) * dt + spec.phi_coeff(t) * (driver[i] - driver[i - 1]);
    }
    return x;
}

}  // namespace fracito
