#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fracito/fbm.hpp"
#include "fracito/path_space.hpp"

namespace fracito {

// Semilinear path-dependent PDE
//   Delta_t u + sigma(t) Delta_xx u + f(gamma_t, u, -Delta_x u) = 0,  u(gamma_T) = g(gamma_T)
// with sigma(t) = H t^{2H-1}, paired with the fractional BSDE
//   Y(t) = g(B_T) + int_t^T f(B_s, Y, Z) ds + int_t^T Z dB  (Wick-Ito-Skorohod).
struct PdeSpec {
    std::string name;
    std::function<double(const StoppedPath&, double y, double z)> driver;
    double lipschitz = 0.0;
    FunctionalPtr terminal;
    HurstParameter hurst{0.7};
    double horizon = 1.0;

    double sigma(double t) const;
};

// f = 0 and f = c.
std::function<double(const StoppedPath&, double, double)> zero_driver();
std::function<double(const StoppedPath&, double, double)> constant_driver(double c);
// f = a y.
std::function<double(const StoppedPath&, double, double)> linear_driver(double a);

// Closed-form PDE solutions used as oracles.
// gamma(t) + c (T - t): solves the f = c problem with g = gamma(T).
FunctionalPtr drift_solution(double c, double horizon);
// gamma(t)^2 + T^{2H} - t^{2H}: solves the f = 0 problem with g = gamma(T)^2.
FunctionalPtr square_solution(HurstParameter h, double horizon);

// Left side of the PDE at one prefix. u needs closed-form derivatives.
double pde_residual(const Functional& u, const PdeSpec& spec, const StoppedPath& path);

struct BsdeSolution {
    TimeGrid grid{1.0, 1};
    std::size_t paths = 0;
    // Row-major paths x (n + 1). z_vertical holds Delta_x Z, which the Wick
    // correction of int Z dB needs.
    std::vector<double> y;
    std::vector<double> z;
    std::vector<double> z_vertical;
    std::string provenance;  // "from_pde" or "picard"

    double Y(std::size_t path, std::size_t k) const { return y[path * grid.points() + k]; }
    double Z(std::size_t path, std::size_t k) const { return z[path * grid.points() + k]; }
};

// Y = u(B_t), Z = -Delta_x u(B_t). Checks the PDE residual on every
// `check_stride`-th prefix of the first `check_paths` paths first and throws
// std::invalid_argument naming the worst prefix if it exceeds `tolerance`.
BsdeSolution bsde_from_pde(const Functional& u, const PdeSpec& spec, const PathBundle& paths,
                           double tolerance = 1e-8, std::size_t check_paths = 16, std::size_t check_stride = 1,
                           std::size_t workers = 0);

struct BsdeResidualReport {
    std::size_t paths = 0;
    std::size_t steps = 0;
    double rms = 0.0;          // over all paths and times
    double rms_start = 0.0;    // at t = 0
    double rms_start_se = 0.0;
    double max_abs = 0.0;
    std::vector<double> rms_by_time;
};

// Residual of the integral identity at every grid time and path: ds-integral
// as a left-point sum, the Z integral as a tail Wick-Ito-Skorohod sum whose
// corrections pair [t_{i-1}, t_i] with the whole history [0, t_{i-1}].
BsdeResidualReport bsde_residual(const BsdeSolution& solution, const PdeSpec& spec, const PathBundle& paths,
                                 std::size_t workers = 0);

struct PicardConfig {
    std::vector<FunctionalPtr> basis;
    std::size_t iterations = 8;
    double beta = 0.0;
    double ridge = 0.0;
    std::size_t workers = 0;
};

struct PicardResult {
    BsdeSolution solution;
    // coefficients[j][b]: fitted weight of basis b at slice j. Slice 0 holds
    // the constant fit; Z(0) uses the slice 1 combination.
    std::vector<std::vector<double>> coefficients;
    std::vector<double> beta_distances;  // ||Y^{k+1} - Y^k||_beta, one per iteration
    bool stalled = false;                // beta distance failed to drop for 3 iterations
    std::vector<std::string> warnings;
    std::string method;
    std::vector<FunctionalPtr> basis;
    FunctionalPtr terminal;

    // Y and Z of the final iterate along one path, each from its own prefix.
    std::pair<std::vector<double>, std::vector<double>> evaluate(std::span<const double> path) const;
};

// Least-squares Monte Carlo Picard iteration. Starts from Y^0 = g and
// Z^0 = -Delta_x g evaluated on the flat extension of each prefix; each
// iteration sweeps backward, regressing the target
//   g(B_T) + sum_{i>j} f(B_{t_{i-1}}, Y^k, Z^k) dt + sum_{i>j} Z dB (Wick)
// on the basis at the prefixes B_{t_j}. Z in cells already revisited in the
// sweep comes from the new iterate, the adjacent cell uses Z^k. Throws
// NumericalError on a rank-deficient design unless ridge > 0.
PicardResult picard_solve(const PdeSpec& spec, const PicardConfig& config, const PathBundle& paths);

// ||a - b||_beta = (mean over paths of sum_j e^{beta t_j} |a - b|^2 dt)^{1/2}.
double beta_norm(std::span<const double> a, std::span<const double> b, const TimeGrid& grid, std::size_t paths,
                 double beta);

// max over prefixes of |v + Delta_x u|.
double z_relation_check(const Functional& u, const Functional& v, const PathBundle& paths,
                        std::size_t workers = 0);

}  // namespace fracito
