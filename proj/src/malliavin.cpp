#include "fracito/malliavin.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "fracito/integrators.hpp"
#include "fracito/parallel.hpp"

namespace fracito {

namespace {

double signed_power(double x, double p) {
    if (x == 0.0) return 0.0;
    return (x > 0.0 ? 1.0 : -1.0) * std::pow(std::abs(x), p);
}

}  // namespace

double phi_kernel(double x, HurstParameter h) {
    const double hv = h.value();
    if (h.is_brownian()) return 0.0;
    if (x == 0.0) return std::numeric_limits<double>::infinity();
    return hv * (2.0 * hv - 1.0) * std::pow(std::abs(x), 2.0 * hv - 2.0);
}

// At H = 1/2 this is the mass of the Dirac kernel, consistent with the
// indicator inner product reducing to Lebesgue measure.
double phi_cell_mass(double t, double a, double b, HurstParameter h) {
    const double p = 2.0 * h.value() - 1.0;
    return h.value() * (signed_power(t - a, p) - signed_power(t - b, p));
}

double indicator_inner_product(double a, double b, double c, double d, HurstParameter h) {
    if (a < 0.0 || c < 0.0 || b < a || d < c) {
        throw std::domain_error("indicator_inner_product: need 0 <= a <= b and 0 <= c <= d");
    }
    const double p = 2.0 * h.value();
    return 0.5 * (std::pow(std::abs(b - c), p) + std::pow(std::abs(a - d), p) - std::pow(std::abs(a - c), p) -
                  std::pow(std::abs(b - d), p));
}

double step_inner_product(const StepFunction& xi, const StepFunction& eta, HurstParameter h) {
    if (xi.grid().horizon() != eta.grid().horizon()) {
        throw std::invalid_argument("step_inner_product: step functions live on different horizons");
    }
    if (xi.grid() != eta.grid()) {
        if (xi.grid().refines(eta.grid())) return step_inner_product(xi, eta.on(xi.grid()), h);
        if (eta.grid().refines(xi.grid())) return step_inner_product(xi.on(eta.grid()), eta, h);
        throw std::invalid_argument("step_inner_product: grids have no common refinement");
    }
    const std::size_t n = xi.grid().steps();
    const double dt = xi.grid().spacing();
    std::vector<double> rho(n);
    for (std::size_t k = 0; k < n; ++k) rho[k] = increment_autocovariance(k, dt, h);
    const auto a = xi.coefficients();
    const auto b = eta.coefficients();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] == 0.0) continue;
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += b[j] * rho[i > j ? i - j : j - i];
        acc += a[i] * row;
    }
    return acc;
}

std::vector<double> weighted_integrals(const IntegralPolynomial& F, const TimeGrid& grid,
                                       std::span<const double> driver) {
    if (driver.size() != grid.points()) throw std::invalid_argument("weighted_integrals: path/grid mismatch");
    std::vector<double> out;
    out.reserve(F.integrands.size());
    for (const auto& xi : F.integrands) {
        double acc = 0.0;
        for (std::size_t j = 0; j < grid.steps(); ++j) acc += xi(grid.time(j)) * (driver[j + 1] - driver[j]);
        out.push_back(acc);
    }
    return out;
}

DerivativeField malliavin_derivative_cylindrical(const IntegralPolynomial& F, const TimeGrid& grid,
                                                 std::span<const double> driver) {
    if (!F.gradient) throw std::domain_error("malliavin_derivative_cylindrical: f has no gradient");
    const auto x = weighted_integrals(F, grid, driver);
    const auto g = F.gradient(x);
    if (g.size() != F.integrands.size()) {
        throw std::invalid_argument("malliavin_derivative_cylindrical: gradient has the wrong dimension");
    }
    std::vector<double> field(grid.steps(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < grid.steps(); ++j) field[j] += g[i] * F.integrands[i](grid.time(j));
    }
    return {StepFunction(grid, std::move(field)), "cylindrical"};
}

DerivativeField malliavin_derivative_path(const Functional& F, const StoppedPath& path) {
    const double dx = vertical_derivative(F, path).value;
    std::vector<double> field(path.grid().steps(), 0.0);
    for (std::size_t j = 0; j < path.cursor(); ++j) field[j] = dx;
    return {StepFunction(path.grid(), std::move(field)), "path"};
}

double d_phi_derivative(const DerivativeField& field, double t, HurstParameter h) {
    const TimeGrid& grid = field.field.grid();
    double acc = 0.0;
    for (std::size_t j = 0; j < grid.steps(); ++j) {
        const double a = field.field.coefficient(j);
        if (a != 0.0) acc += a * phi_cell_mass(t, grid.time(j), grid.time(j + 1), h);
    }
    return acc;
}

double wick_correction(double dx_f, double t_prev, double t_cur, HurstParameter h) {
    if (!(t_prev < t_cur)) throw std::domain_error("wick_correction: need t_prev < t_cur");
    if (dx_f == 0.0) return 0.0;
    return dx_f * indicator_inner_product(0.0, t_prev, t_prev, t_cur, h);
}

namespace {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
    const double m = static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += x;
    const double mean = s / m;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double var = v.size() > 1 ? ss / (m - 1.0) : 0.0;
    return {mean, std::sqrt(var / m)};
}

}  // namespace

WisVarianceEstimate wis_variance(const Functional& F, HurstParameter hurst, TimeGrid grid, std::size_t paths,
                                 std::uint64_t seed, std::size_t workers) {
    if (paths < 2) throw std::invalid_argument("wis_variance: need at least two paths");
    const std::size_t n = grid.steps();
    const TimeGrid fine = grid.refined();
    const auto generator = make_generator(fine, hurst);
    std::vector<double> rho(n);
    for (std::size_t k = 0; k < n; ++k) rho[k] = increment_autocovariance(k, grid.spacing(), hurst);
    const double two_h = 2.0 * hurst.value();
    std::vector<double> mass(n);  // int_{t_{i-1}}^{t_i} H t^{2H-1} dt
    for (std::size_t i = 1; i <= n; ++i) {
        mass[i - 1] = 0.5 * (std::pow(grid.time(i), two_h) - std::pow(grid.time(i - 1), two_h));
    }

    std::vector<double> kernel(paths), deriv(paths), total(paths), wis(paths);
    parallel_for(paths, workers, [&](std::size_t p) {
        NormalSource normals(PathRng(seed, p));
        std::vector<double> fine_values(fine.points());
        generator->sample_into(normals, fine_values);
        const auto coarse = downsample(fine_values, 2);
        const auto f_fine = sweep_quantity(F, Quantity::value, fine, fine_values);
        const auto dx = sweep_quantity(F, Quantity::vertical, grid, coarse);

        double k_term = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < n; ++j) row += rho[i > j ? i - j : j - i] * f_fine[2 * j + 1];
            k_term += f_fine[2 * i + 1] * row;
        }
        double d_int = 0.0;
        for (std::size_t i = 0; i < n; ++i) d_int += dx[i] * mass[i];
        kernel[p] = k_term;
        deriv[p] = d_int * d_int;
        total[p] = k_term + d_int * d_int;
        wis[p] = wis_sum(F, grid, coarse, hurst).value;
        if (!std::isfinite(total[p]) || !std::isfinite(wis[p])) {
            throw std::runtime_error("wis_variance: non-finite term on path " + std::to_string(p));
        }
    });

    WisVarianceEstimate out;
    out.paths = paths;
    out.steps = n;
    const auto k = mean_se(kernel);
    const auto d = mean_se(deriv);
    const auto t = mean_se(total);
    out.kernel_term = k.mean;
    out.kernel_term_se = k.se;
    out.derivative_term = d.mean;
    out.derivative_term_se = d.se;
    out.total = t.mean;
    out.total_se = t.se;

    const auto w = mean_se(wis);
    std::vector<double> centred_sq(paths);
    for (std::size_t p = 0; p < paths; ++p) centred_sq[p] = (wis[p] - w.mean) * (wis[p] - w.mean);
    const auto v = mean_se(centred_sq);
    const double m = static_cast<double>(paths);
    out.empirical_variance = v.mean * m / (m - 1.0);
    out.empirical_variance_se = v.se;
    return out;
}

double covariance_kernel_quadrature(TimeGrid grid, HurstParameter hurst) {
    const std::size_t n = grid.steps();
    std::vector<double> rho(n), mid(n);
    for (std::size_t k = 0; k < n; ++k) rho[k] = increment_autocovariance(k, grid.spacing(), hurst);
    for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (grid.time(i) + grid.time(i + 1));
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) acc += rho[i > j ? i - j : j - i] * covariance(mid[i], mid[j], hurst);
    }
    return acc;
}

}  // namespace fracito
