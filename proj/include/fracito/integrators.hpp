#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fracito/fbm.hpp"
#include "fracito/path_space.hpp"
#include "fracito/step_function.hpp"

namespace fracito {

enum class DriverKind { brownian, fbm };

// X(t) = x0 + int_0^t psi ds + int_0^t phi dB with step coefficients.
struct ItoProcessSpec {
    double x0 = 0.0;
    StepFunction psi;
    StepFunction phi_coeff;
    DriverKind driver = DriverKind::fbm;

    // psi = 0, phi = 1: X = x0 + B.
    static ItoProcessSpec driver_itself(TimeGrid grid, DriverKind driver, double x0 = 0.0);
};

enum class IntegralKind { ito_type, stratonovich, wis };

std::string to_string(IntegralKind kind);

struct IntegralSample {
    double value = 0.0;
    std::size_t resolution = 0;
    IntegralKind kind = IntegralKind::ito_type;
};

// sum_i F(X_{t_{i-1}}) (driver(t_i) - driver(t_{i-1})).
IntegralSample ito_type_sum(const Functional& F, const TimeGrid& grid, std::span<const double> driver,
                            std::span<const double> x);

// sum_i w_i F(X_{m_i}) (driver(t_i) - driver(t_{i-1})) with m_i the cell
// midpoint. Both paths live on grid.refined(); `weights` (one per coarse
// cell) defaults to 1.
IntegralSample stratonovich_sum(const Functional& F, const TimeGrid& grid, std::span<const double> driver_refined,
                                std::span<const double> x_refined, std::span<const double> weights = {});

// sum_i [F(B_{t_{i-1}}) dB_i - Delta_x F(B_{t_{i-1}}) <1_[0,t_{i-1}], 1_[t_{i-1},t_i]>].
// The integrand is a functional of the fBm driver itself.
IntegralSample wis_sum(const Functional& F, const FbmPath& path);
IntegralSample wis_sum(const Functional& F, const TimeGrid& grid, std::span<const double> driver,
                       HurstParameter hurst);

// Sum of the Wick corrections for left-point vertical derivatives dx[0..n-1]
// over the cells [first_cell, n) of the grid.
double wick_correction_sum(std::span<const double> dx, const TimeGrid& grid, HurstParameter hurst,
                           std::size_t first_cell = 0);

// Per-cell factor <1_[0,t_{i-1}], 1_[t_{i-1},t_i]> = (t_i^{2H} - t_{i-1}^{2H} - dt^{2H}) / 2.
std::vector<double> wick_cell_factors(const TimeGrid& grid, HurstParameter hurst);

// X on the driver grid, exact for step coefficients.
std::vector<double> build_ito_process(const ItoProcessSpec& spec, const TimeGrid& grid,
                                      std::span<const double> driver);

}  // namespace fracito
