#include "fracito/bsde.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fracito/integrators.hpp"
#include "fracito/parallel.hpp"

namespace fracito {

double PdeSpec::sigma(double t) const {
    const double h = hurst.value();
    if (t <= 0.0) return h == 0.5 ? 0.5 : 0.0;
    return h * std::pow(t, 2.0 * h - 1.0);
}

std::function<double(const StoppedPath&, double, double)> zero_driver() {
    return [](const StoppedPath&, double, double) { return 0.0; };
}

std::function<double(const StoppedPath&, double, double)> constant_driver(double c) {
    return [c](const StoppedPath&, double, double) { return c; };
}

std::function<double(const StoppedPath&, double, double)> linear_driver(double a) {
    return [a](const StoppedPath&, double y, double) { return a * y; };
}

FunctionalPtr drift_solution(double c, double horizon) {
    return cylindrical({"drift_solution",
                        [c, horizon](double t, double x) { return x + c * (horizon - t); },
                        [c](double, double) { return -c; },
                        [](double, double) { return 1.0; },
                        [](double, double) { return 0.0; }});
}

FunctionalPtr square_solution(HurstParameter h, double horizon) {
    const double p = 2.0 * h.value();
    const double tail = std::pow(horizon, p);
    return cylindrical({"square_solution",
                        [p, tail](double t, double x) { return x * x + tail - std::pow(t, p); },
                        [p](double t, double) { return t > 0.0 ? -p * std::pow(t, p - 1.0) : (p == 1.0 ? -1.0 : 0.0); },
                        [](double, double x) { return 2.0 * x; },
                        [](double, double) { return 2.0; }});
}

double pde_residual(const Functional& u, const PdeSpec& spec, const StoppedPath& path) {
    for (auto q : {Quantity::horizontal, Quantity::vertical, Quantity::vertical2}) {
        if (!u.has_closed_form(q)) {
            throw std::invalid_argument("pde_residual: " + u.name() + " has no closed-form " + to_string(q) +
                                        " derivative");
        }
    }
    const double value = u.value(path);
    const double dt = u.closed_form(Quantity::horizontal, path);
    const double dx = u.closed_form(Quantity::vertical, path);
    const double dxx = u.closed_form(Quantity::vertical2, path);
    return dt + spec.sigma(path.time()) * dxx + spec.driver(path, value, -dx);
}

namespace {

void check_bundle(const PdeSpec& spec, const PathBundle& paths) {
    if (!spec.terminal) throw std::invalid_argument("PDE spec has no terminal functional");
    if (!spec.driver) throw std::invalid_argument("PDE spec has no driver");
    if (paths.count == 0) throw std::invalid_argument("no paths supplied");
    if (std::abs(paths.grid.horizon() - spec.horizon) > 1e-12) {
        throw std::invalid_argument("path horizon does not match the PDE horizon");
    }
    if (paths.hurst.value() != spec.hurst.value()) {
        throw std::invalid_argument("path Hurst parameter does not match the PDE");
    }
}

}  // namespace

BsdeSolution bsde_from_pde(const Functional& u, const PdeSpec& spec, const PathBundle& paths, double tolerance,
                           std::size_t check_paths, std::size_t check_stride, std::size_t workers) {
    check_bundle(spec, paths);
    const TimeGrid& grid = paths.grid;
    const std::size_t n = grid.steps();
    check_stride = std::max<std::size_t>(1, check_stride);

    double worst = 0.0;
    std::size_t worst_path = 0, worst_k = 0;
    for (std::size_t p = 0; p < std::min(check_paths, paths.count); ++p) {
        for (std::size_t k = 0; k <= n; k += check_stride) {
            const double r = std::abs(pde_residual(u, spec, StoppedPath(grid, paths.row(p), k)));
            if (!(r <= worst)) {
                worst = r;
                worst_path = p;
                worst_k = k;
            }
        }
    }
    if (!(worst <= tolerance)) {
        std::ostringstream msg;
        msg << "bsde_from_pde: " << u.name() << " does not solve the PDE; residual " << worst << " at path "
            << worst_path << ", t = " << grid.time(worst_k) << " (index " << worst_k << ")";
        throw std::invalid_argument(msg.str());
    }
    double terminal_gap = 0.0;
    for (std::size_t p = 0; p < std::min(check_paths, paths.count); ++p) {
        const StoppedPath full(grid, paths.row(p), n);
        terminal_gap = std::max(terminal_gap, std::abs(u.value(full) - spec.terminal->value(full)));
    }
    if (!(terminal_gap <= tolerance * std::max(1.0, std::abs(spec.terminal->value(StoppedPath(grid, paths.row(0), n)))))) {
        throw std::invalid_argument("bsde_from_pde: " + u.name() + " misses the terminal condition by " +
                                    std::to_string(terminal_gap));
    }

    BsdeSolution s;
    s.grid = grid;
    s.paths = paths.count;
    s.provenance = "from_pde";
    const std::size_t pts = grid.points();
    s.y.resize(paths.count * pts);
    s.z.resize(paths.count * pts);
    s.z_vertical.resize(paths.count * pts);
    parallel_for(paths.count, workers, [&](std::size_t p) {
        const auto row = paths.row(p);
        std::span<double> y(s.y.data() + p * pts, pts), z(s.z.data() + p * pts, pts),
            zx(s.z_vertical.data() + p * pts, pts);
        sweep_quantity(u, Quantity::value, grid, row, y);
        sweep_quantity(u, Quantity::vertical, grid, row, z);
        sweep_quantity(u, Quantity::vertical2, grid, row, zx);
        for (std::size_t k = 0; k < pts; ++k) {
            z[k] = -z[k];
            zx[k] = -zx[k];
        }
    });
    return s;
}

BsdeResidualReport bsde_residual(const BsdeSolution& solution, const PdeSpec& spec, const PathBundle& paths,
                                 std::size_t workers) {
    check_bundle(spec, paths);
    if (!(solution.grid == paths.grid) || solution.paths != paths.count) {
        throw std::invalid_argument("bsde_residual: solution and paths live on different grids");
    }
    const TimeGrid& grid = paths.grid;
    const std::size_t n = grid.steps(), pts = grid.points();
    const double dt = grid.spacing();
    const auto wick = wick_cell_factors(grid, spec.hurst);

    std::vector<double> residual(paths.count * pts);
    parallel_for(paths.count, workers, [&](std::size_t p) {
        const auto b = paths.row(p);
        const double* y = solution.y.data() + p * pts;
        const double* z = solution.z.data() + p * pts;
        const double* zx = solution.z_vertical.data() + p * pts;
        double* r = residual.data() + p * pts;
        double tail = spec.terminal->value(StoppedPath(grid, b, n));
        r[n] = y[n] - tail;
        for (std::size_t k = n; k-- > 0;) {
            const std::size_t i = k + 1;
            const StoppedPath prefix(grid, b, k);
            tail += spec.driver(prefix, y[k], z[k]) * dt;
            tail += z[k] * (b[i] - b[k]) - zx[k] * wick[k];
            r[k] = y[k] - tail;
        }
    });

    BsdeResidualReport rep;
    rep.paths = paths.count;
    rep.steps = n;
    rep.rms_by_time.assign(pts, 0.0);
    double total = 0.0;
    std::vector<double> start(paths.count);
    for (std::size_t p = 0; p < paths.count; ++p) {
        for (std::size_t k = 0; k < pts; ++k) {
            const double v = residual[p * pts + k];
            if (!std::isfinite(v)) throw NumericalError("bsde_residual: non-finite residual");
            rep.rms_by_time[k] += v * v;
            total += v * v;
            rep.max_abs = std::max(rep.max_abs, std::abs(v));
        }
        start[p] = residual[p * pts] * residual[p * pts];
    }
    const double m = static_cast<double>(paths.count);
    for (auto& v : rep.rms_by_time) v = std::sqrt(v / m);
    rep.rms = std::sqrt(total / (m * static_cast<double>(pts)));
    rep.rms_start = rep.rms_by_time[0];
    if (paths.count > 1 && rep.rms_start > 0.0) {
        const double ms = rep.rms_start * rep.rms_start;
        double ss = 0.0;
        for (double v : start) ss += (v - ms) * (v - ms);
        rep.rms_start_se = std::sqrt(ss / (m - 1.0) / m) / (2.0 * rep.rms_start);
    }
    return rep;
}

double beta_norm(std::span<const double> a, std::span<const double> b, const TimeGrid& grid, std::size_t paths,
                 double beta) {
    const std::size_t pts = grid.points();
    if (a.size() != paths * pts || b.size() != a.size()) throw std::invalid_argument("beta_norm: size mismatch");
    if (beta < 0.0) throw std::invalid_argument("beta must be nonnegative");
    std::vector<double> weight(pts);
    for (std::size_t k = 0; k < pts; ++k) weight[k] = std::exp(beta * grid.time(k)) * grid.spacing();
    double acc = 0.0;
    for (std::size_t p = 0; p < paths; ++p) {
        for (std::size_t k = 0; k < pts; ++k) {
            const double d = a[p * pts + k] - b[p * pts + k];
            acc += weight[k] * d * d;
        }
    }
    return std::sqrt(acc / static_cast<double>(paths));
}

double z_relation_check(const Functional& u, const Functional& v, const PathBundle& paths, std::size_t workers) {
    const TimeGrid& grid = paths.grid;
    std::vector<double> worst(paths.count, 0.0);
    parallel_for(paths.count, workers, [&](std::size_t p) {
        const auto dx = sweep_quantity(u, Quantity::vertical, grid, paths.row(p));
        const auto vv = sweep_quantity(v, Quantity::value, grid, paths.row(p));
        for (std::size_t k = 0; k < dx.size(); ++k) worst[p] = std::max(worst[p], std::abs(vv[k] + dx[k]));
    });
    return *std::max_element(worst.begin(), worst.end());
}

// ------------------------------------------------------------------ Picard

namespace {

// Basis quantities along every prefix of every path, laid out
// [basis][path][k].
struct BasisTable {
    std::size_t basis = 0, paths = 0, pts = 0;
    std::vector<double> value, dx, dxx;

    double at(const std::vector<double>& v, std::size_t b, std::size_t p, std::size_t k) const {
        return v[(b * paths + p) * pts + k];
    }
};

Eigen::VectorXd least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& rhs, double ridge, double t) {
    if (ridge > 0.0) {
        const Eigen::Index p = a.cols();
        Eigen::MatrixXd aug(a.rows() + p, p);
        aug.topRows(a.rows()) = a;
        aug.bottomRows(p) = std::sqrt(ridge * static_cast<double>(a.rows())) * Eigen::MatrixXd::Identity(p, p);
        Eigen::VectorXd r(a.rows() + p);
        r.head(a.rows()) = rhs;
        r.tail(p).setZero();
        return aug.colPivHouseholderQr().solve(r);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < a.cols()) {
        std::ostringstream msg;
        msg << "picard_solve: regression design at t = " << t << " has rank " << qr.rank() << " < " << a.cols()
            << "; drop collinear basis functionals or set ridge > 0";
        throw NumericalError(msg.str());
    }
    return qr.solve(rhs);
}

}  // namespace

PicardResult picard_solve(const PdeSpec& spec, const PicardConfig& config, const PathBundle& paths) {
    check_bundle(spec, paths);
    if (config.basis.empty()) throw std::invalid_argument("picard_solve: empty basis");
    if (config.iterations < 1) throw std::invalid_argument("picard_solve: need at least one iteration");
    if (config.beta < 0.0 || config.ridge < 0.0) throw std::invalid_argument("picard_solve: beta and ridge must be >= 0");
    for (const auto& b : config.basis) {
        if (!b) throw std::invalid_argument("picard_solve: null basis functional");
        if (b->smoothness() == Smoothness::C00) {
            throw std::invalid_argument("picard_solve: basis functional " + b->name() + " has no vertical derivative");
        }
    }
    if (paths.count < config.basis.size() + 1) throw std::invalid_argument("picard_solve: fewer paths than basis functionals");

    const TimeGrid& grid = paths.grid;
    const std::size_t n = grid.steps(), pts = grid.points(), M = paths.count, P = config.basis.size();
    const double dt = grid.spacing();
    const auto wick = wick_cell_factors(grid, spec.hurst);
    const std::size_t workers = config.workers;

    BasisTable table;
    table.basis = P;
    table.paths = M;
    table.pts = pts;
    table.value.resize(P * M * pts);
    table.dx.resize(P * M * pts);
    table.dxx.resize(P * M * pts);
    parallel_for(M, workers, [&](std::size_t p) {
        for (std::size_t b = 0; b < P; ++b) {
            const std::size_t off = (b * M + p) * pts;
            const auto& f = *config.basis[b];
            sweep_quantity(f, Quantity::value, grid, paths.row(p), {table.value.data() + off, pts});
            sweep_quantity(f, Quantity::vertical, grid, paths.row(p), {table.dx.data() + off, pts});
            sweep_quantity(f, Quantity::vertical2, grid, paths.row(p), {table.dxx.data() + off, pts});
        }
    });

    // Initial iterate: the terminal functional on the flat extension of each
    // prefix, i.e. the solution if the path froze at t.
    std::vector<double> y(M * pts), z(M * pts), zx(M * pts), terminal(M);
    parallel_for(M, workers, [&](std::size_t p) {
        const auto row = paths.row(p);
        const auto& g = *spec.terminal;
        terminal[p] = g.value(StoppedPath(grid, row, n));
        for (std::size_t k = 0; k < pts; ++k) {
            const StoppedPath prefix(grid, row, k);
            const double h = kVerticalRelativeBump * std::max(1.0, prefix.sup_norm());
            auto frozen = [&](double bump) { return g.value(prefix.bumped(bump).extended(n)); };
            const double mid = frozen(0.0), up = frozen(h), down = frozen(-h);
            y[p * pts + k] = mid;
            z[p * pts + k] = -(up - down) / (2.0 * h);
            zx[p * pts + k] = -(up - 2.0 * mid + down) / (h * h);
        }
    });

    PicardResult result;
    result.basis = config.basis;
    result.terminal = spec.terminal;
    result.method =
        "least-squares Monte Carlo Picard iteration over path-functional basis; Z = -Delta_x of the fitted "
        "combination; Y(0) is the sample mean of the slice-0 target";
    result.coefficients.assign(pts, std::vector<double>(P, 0.0));

    std::vector<double> y_next(M * pts), z_next(M * pts), zx_next(M * pts);
    std::vector<double> tail(M), target(M);
    Eigen::MatrixXd design(M, P);
    Eigen::VectorXd rhs(M);
    std::size_t non_decreasing = 0;

    for (std::size_t iter = 0; iter < config.iterations; ++iter) {
        // tail[p] = g + sum over cells i >= j + 2 of f(Y^k, Z^k) dt + Wick Z^{k+1} dB.
        for (std::size_t p = 0; p < M; ++p) tail[p] = terminal[p];
        for (std::size_t p = 0; p < M; ++p) {
            y_next[p * pts + n] = terminal[p];
            z_next[p * pts + n] = z[p * pts + n];
            zx_next[p * pts + n] = zx[p * pts + n];
        }
        for (std::size_t j = n; j-- > 0;) {
            parallel_for(M, workers, [&](std::size_t p) {
                const auto b = paths.row(p);
                const std::size_t o = p * pts;
                const double drift = spec.driver(StoppedPath(grid, b, j), y[o + j], z[o + j]) * dt;
                target[p] = tail[p] + drift + z[o + j] * (b[j + 1] - b[j]) - zx[o + j] * wick[j];
            });
            const double t = grid.time(j);
            std::vector<double> coef(P, 0.0);
            if (j == 0) {
                double s = 0.0;
                for (std::size_t p = 0; p < M; ++p) s += target[p];
                const double y0 = s / static_cast<double>(M);
                // Z at t = 0 from the slice-1 combination on the one-point prefix.
                const auto& c1 = result.coefficients[std::min<std::size_t>(1, n)];
                for (std::size_t p = 0; p < M; ++p) {
                    double zz = 0.0, zzx = 0.0;
                    for (std::size_t bb = 0; bb < P; ++bb) {
                        zz += c1[bb] * table.at(table.dx, bb, p, 0);
                        zzx += c1[bb] * table.at(table.dxx, bb, p, 0);
                    }
                    y_next[p * pts] = y0;
                    z_next[p * pts] = -zz;
                    zx_next[p * pts] = -zzx;
                }
                coef.assign(P, 0.0);
                coef.push_back(y0);  // constant fit kept in the trailing slot
            } else {
                for (std::size_t p = 0; p < M; ++p) {
                    for (std::size_t bb = 0; bb < P; ++bb) design(p, bb) = table.at(table.value, bb, p, j);
                    rhs(p) = target[p];
                }
                const Eigen::VectorXd beta = least_squares(design, rhs, config.ridge, t);
                for (std::size_t bb = 0; bb < P; ++bb) coef[bb] = beta(bb);
                parallel_for(M, workers, [&](std::size_t p) {
                    double yy = 0.0, zz = 0.0, zzx = 0.0;
                    for (std::size_t bb = 0; bb < P; ++bb) {
                        yy += coef[bb] * table.at(table.value, bb, p, j);
                        zz += coef[bb] * table.at(table.dx, bb, p, j);
                        zzx += coef[bb] * table.at(table.dxx, bb, p, j);
                    }
                    y_next[p * pts + j] = yy;
                    z_next[p * pts + j] = -zz;
                    zx_next[p * pts + j] = -zzx;
                });
            }
            result.coefficients[j] = coef;
            // Cell [t_j, t_{j+1}] joins the tail with the new Z(t_j).
            if (j > 0) {
                for (std::size_t p = 0; p < M; ++p) {
                    const auto b = paths.row(p);
                    const std::size_t o = p * pts;
                    tail[p] += spec.driver(StoppedPath(grid, b, j), y[o + j], z[o + j]) * dt +
                               z_next[o + j] * (b[j + 1] - b[j]) - zx_next[o + j] * wick[j];
                }
            }
        }
        for (std::size_t p = 0; p < M; ++p) {
            if (!std::isfinite(y_next[p * pts]) || !std::isfinite(z_next[p * pts])) {
                throw NumericalError("picard_solve: iterate became non-finite at iteration " + std::to_string(iter + 1));
            }
        }
        const double d = beta_norm(y_next, y, grid, M, config.beta);
        if (!result.beta_distances.empty() && d >= result.beta_distances.back()) {
            ++non_decreasing;
        } else {
            non_decreasing = 0;
        }
        result.beta_distances.push_back(d);
        if (non_decreasing >= 3 && !result.stalled) {
            result.stalled = true;
            result.warnings.push_back("beta-norm distance did not decrease for 3 consecutive iterations (iteration " +
                                      std::to_string(iter + 1) + ")");
        }
        std::swap(y, y_next);
        std::swap(z, z_next);
        std::swap(zx, zx_next);
    }

    result.solution.grid = grid;
    result.solution.paths = M;
    result.solution.provenance = "picard";
    result.solution.y = std::move(y);
    result.solution.z = std::move(z);
    result.solution.z_vertical = std::move(zx);
    return result;
}

std::pair<std::vector<double>, std::vector<double>> PicardResult::evaluate(std::span<const double> path) const {
    const TimeGrid& grid = solution.grid;
    const std::size_t pts = grid.points(), P = basis.size();
    if (path.size() != pts) throw std::invalid_argument("evaluate: path is not on the solution grid");
    std::vector<double> y(pts, 0.0), z(pts, 0.0);
    for (std::size_t b = 0; b < P; ++b) {
        const auto v = sweep_quantity(*basis[b], Quantity::value, grid, path);
        const auto dx = sweep_quantity(*basis[b], Quantity::vertical, grid, path);
        for (std::size_t k = 1; k < pts; ++k) {
            y[k] += coefficients[k][b] * v[k];
            z[k] -= coefficients[k][b] * dx[k];
        }
        if (pts > 1) z[0] -= coefficients[1][b] * dx[0];
    }
    y[0] = coefficients[0].size() > P ? coefficients[0][P] : 0.0;
    if (pts > 1 && terminal) {
        const StoppedPath full(grid, path, pts - 1);
        y[pts - 1] = terminal->value(full);
        z[pts - 1] = -vertical_derivative(*terminal, full).value;
    }
    return {y, z};
}

}  // namespace fracito
