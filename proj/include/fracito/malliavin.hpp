#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fracito/fbm.hpp"
#include "fracito/path_space.hpp"
#include "fracito/step_function.hpp"

namespace fracito {

// phi(x) = H (2H - 1) |x|^{2H - 2}; integrable singularity at 0.
double phi_kernel(double x, HurstParameter h);

// int_a^b phi(t - s) ds, from the antiderivative
// H (sgn(t - a)|t - a|^{2H-1} - sgn(t - b)|t - b|^{2H-1}).
double phi_cell_mass(double t, double a, double b, HurstParameter h);

// <1_[a,b], 1_[c,d]> under the phi kernel, in closed form:
// (|b - c|^{2H} + |a - d|^{2H} - |a - c|^{2H} - |b - d|^{2H}) / 2.
double indicator_inner_product(double a, double b, double c, double d, HurstParameter h);

// Exact inner product of two step functions on grids with a common
// refinement (one grid must refine the other).
double step_inner_product(const StepFunction& xi, const StepFunction& eta, HurstParameter h);

// Malliavin derivative s -> D_s F as a step function in s.
struct DerivativeField {
    StepFunction field;
    std::string origin;  // "cylindrical" or "path"
};

// F = f(int xi_1 dB, ..., int xi_m dB) with a smooth f and step integrands.
struct IntegralPolynomial {
    std::function<double(std::span<const double>)> f;
    std::function<std::vector<double>(std::span<const double>)> gradient;
    std::vector<StepFunction> integrands;
};

// Integrals int xi_i dB evaluated along one sampled driver path.
std::vector<double> weighted_integrals(const IntegralPolynomial& F, const TimeGrid& grid,
                                       std::span<const double> driver);

// D_s F = sum_i d_i f(...) xi_i(s), on the driver grid.
DerivativeField malliavin_derivative_cylindrical(const IntegralPolynomial& F, const TimeGrid& grid,
                                                 std::span<const double> driver);

// D_s F(B_t) = Delta_x F(B_t) 1_[0,t](s).
DerivativeField malliavin_derivative_path(const Functional& F, const StoppedPath& path);

// D^phi_t F = int_0^T phi(t - s) D_s F ds, integrated cell by cell exactly.
double d_phi_derivative(const DerivativeField& field, double t, HurstParameter h);

// Delta_x F <1_[0,t_prev], 1_[t_prev,t_cur]>: the term that turns the
// ordinary product F (B(t_cur) - B(t_prev)) into the Wick product.
double wick_correction(double dx_f, double t_prev, double t_cur, HurstParameter h);

// Monte Carlo evaluation of E[ ||F||_T^2 + (int_0^T D^phi_s F(B_s) ds)^2 ] for a
// functional integrand F(B_t), next to the sample variance of the discrete
// Wick-Ito-Skorohod sum over the same paths.
struct WisVarianceEstimate {
    std::size_t paths = 0;
    std::size_t steps = 0;
    double kernel_term = 0.0;  // E int int phi(u - v) F(B_u) F(B_v) du dv
    double kernel_term_se = 0.0;
    double derivative_term = 0.0;  // E (int D^phi_s F(B_s) ds)^2
    double derivative_term_se = 0.0;
    double total = 0.0;
    double total_se = 0.0;
    double empirical_variance = 0.0;  // of wis_sum(F) on the same paths
    double empirical_variance_se = 0.0;
};

WisVarianceEstimate wis_variance(const Functional& F, HurstParameter hurst, TimeGrid grid, std::size_t paths,
                                 std::uint64_t seed, std::size_t workers = 0);

// Deterministic quadrature of int int phi(u - v) Cov(B(u), B(v)) du dv over
// [0, T]^2: covariance at cell midpoints against exact cell kernel masses.
double covariance_kernel_quadrature(TimeGrid grid, HurstParameter hurst);

}  // namespace fracito
