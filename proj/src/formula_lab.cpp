#include "fracito/formula_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fracito/parallel.hpp"

namespace fracito {

std::string to_string(FormulaId id) {
    switch (id) {
        case FormulaId::theorem20: return "theorem20";
        case FormulaId::bm_stratonovich: return "bm_stratonovich";
        case FormulaId::prop43: return "prop43";
        case FormulaId::prop45: return "prop45";
        case FormulaId::theorem32: return "theorem32";
        case FormulaId::prop54: return "prop54";
        case FormulaId::theorem50: return "theorem50";
    }
    return "?";
}

std::optional<FormulaId> formula_from_string(const std::string& s) {
    for (auto id : {FormulaId::theorem20, FormulaId::bm_stratonovich, FormulaId::prop43, FormulaId::prop45,
                    FormulaId::theorem32, FormulaId::prop54, FormulaId::theorem50}) {
        if (to_string(id) == s) return id;
    }
    return std::nullopt;
}

Smoothness required_smoothness(FormulaId id) {
    switch (id) {
        case FormulaId::prop43:
        case FormulaId::prop45:
        case FormulaId::prop54: return Smoothness::C11;
        default: return Smoothness::C12;
    }
}

bool formula_is_brownian(FormulaId id) {
    return id == FormulaId::theorem20 || id == FormulaId::bm_stratonovich || id == FormulaId::prop43;
}

const NamedStatistic& ResolutionStats::extra(const std::string& name) const {
    for (const auto& e : extras) {
        if (e.name == name) return e;
    }
    throw std::out_of_range("no statistic named " + name);
}

bool ResidualReport::rms_nonincreasing(std::size_t allowed_inversions, double slack_se) const {
    std::size_t inversions = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double rise = rows[i].rms - rows[i - 1].rms;
        if (rise <= 0.0) continue;
        const double se = std::hypot(rows[i].rms_se, rows[i - 1].rms_se);
        if (rise > slack_se * se) return false;
        ++inversions;
    }
    return inversions <= allowed_inversions;
}

bool ResidualReport::rms_strictly_decreasing() const {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (!(rows[i].rms < rows[i - 1].rms)) return false;
    }
    return true;
}

namespace {

bool needs_midpoints(FormulaId id) {
    return id != FormulaId::theorem20 && id != FormulaId::theorem50;
}

std::vector<std::string> extra_names(FormulaId id) {
    switch (id) {
        case FormulaId::prop43: return {"gap", "correction"};
        case FormulaId::prop45: return {"stratonovich", "ito"};
        case FormulaId::prop54: return {"stratonovich", "correction", "stratonovich_minus_correction", "wis"};
        case FormulaId::theorem50: return {"wis_term"};
        default: return {};
    }
}

void validate(const FormulaCase& c) {
    if (!c.functional) throw std::invalid_argument("formula case has no functional");
    if (c.functional->smoothness() < required_smoothness(c.formula)) {
        throw std::invalid_argument(to_string(c.formula) + " needs a " + to_string(required_smoothness(c.formula)) +
                                    " functional; " + c.functional->name() + " is " +
                                    to_string(c.functional->smoothness()));
    }
    const bool brownian = formula_is_brownian(c.formula);
    if (brownian && !c.hurst.is_brownian()) {
        throw std::invalid_argument(to_string(c.formula) + " is a Brownian formula; set H = 0.5");
    }
    if (!brownian && c.hurst.is_brownian()) {
        throw std::invalid_argument(to_string(c.formula) + " needs a fractional driver with H > 0.5");
    }
    if (c.process) {
        const DriverKind expected = brownian ? DriverKind::brownian : DriverKind::fbm;
        if (c.process->driver != expected) {
            throw std::invalid_argument(to_string(c.formula) + ": process driver does not match the formula");
        }
        if (c.formula == FormulaId::prop54 || c.formula == FormulaId::theorem50) {
            throw std::invalid_argument(to_string(c.formula) +
                                        ": Wick-Ito-Skorohod integrands must be functionals of the fBm driver itself");
        }
    }
    if (c.ladder.empty()) throw std::invalid_argument("formula case needs at least one resolution");
    const std::size_t finest = c.ladder.back();
    for (std::size_t i = 0; i < c.ladder.size(); ++i) {
        if (c.ladder[i] == 0 || finest % c.ladder[i] != 0 || (i > 0 && c.ladder[i] <= c.ladder[i - 1])) {
            throw std::invalid_argument("resolution ladder must be increasing and divide its finest entry");
        }
    }
    if (c.paths < 2) throw std::invalid_argument("formula case needs at least two paths");
}

// Per-path residual and auxiliary statistics at one resolution.
struct Sample {
    double residual = 0.0;
    std::vector<double> extras;
};

class Pipeline {
public:
    explicit Pipeline(const FormulaCase& c) : c_(c), F_(*c.functional) {}

    Sample run(std::size_t n, std::span<const double> driver_c, std::span<const double> x_c,
               std::span<const double> x_r) const {
        const TimeGrid grid(c_.horizon, n);
        const double dt = grid.spacing();
        const HurstParameter h = c_.hurst;
        const FormulaId id = c_.formula;

        std::vector<double> psi(n, 0.0), phi(n, 1.0);
        if (c_.process) {
            for (std::size_t i = 0; i < n; ++i) {
                psi[i] = c_.process->psi(grid.time(i));
                phi[i] = c_.process->phi_coeff(grid.time(i));
            }
        }
        auto increment = [&](std::size_t i) { return driver_c[i] - driver_c[i - 1]; };

        Sample s;
        switch (id) {
            case FormulaId::theorem20:
            case FormulaId::theorem32:
            case FormulaId::bm_stratonovich: {
                const auto dt_f = sweep_quantity(F_, Quantity::horizontal, grid, x_c);
                const auto dx_f = sweep_quantity(F_, Quantity::vertical, grid, x_c);
                double drift = 0.0;
                for (std::size_t i = 1; i <= n; ++i) drift += (dt_f[i - 1] + dx_f[i - 1] * psi[i - 1]) * dt;
                double noise = 0.0;
                if (id == FormulaId::theorem20) {
                    const auto dxx_f = sweep_quantity(F_, Quantity::vertical2, grid, x_c);
                    for (std::size_t i = 1; i <= n; ++i) {
                        noise += dx_f[i - 1] * phi[i - 1] * increment(i) +
                                 0.5 * dxx_f[i - 1] * phi[i - 1] * phi[i - 1] * dt;
                    }
                } else {
                    const auto dx_mid = sweep_quantity(F_, Quantity::vertical, grid.refined(), x_r);
                    for (std::size_t i = 1; i <= n; ++i) noise += dx_mid[2 * i - 1] * phi[i - 1] * increment(i);
                }
                s.residual = endpoint_change(grid, x_c) - drift - noise;
                break;
            }
            case FormulaId::prop43:
            case FormulaId::prop45: {
                const auto f_left = sweep_quantity(F_, Quantity::value, grid, x_c);
                const auto f_mid = sweep_quantity(F_, Quantity::value, grid.refined(), x_r);
                double strat = 0.0, ito = 0.0;
                for (std::size_t i = 1; i <= n; ++i) {
                    strat += f_mid[2 * i - 1] * increment(i);
                    ito += f_left[i - 1] * increment(i);
                }
                if (id == FormulaId::prop43) {
                    const auto dx_f = sweep_quantity(F_, Quantity::vertical, grid, x_c);
                    double corr = 0.0;
                    for (std::size_t i = 1; i <= n; ++i) corr += 0.5 * dx_f[i - 1] * phi[i - 1] * dt;
                    s.residual = strat - ito - corr;
                    s.extras = {strat - ito, corr};
                } else {
                    s.residual = strat - ito;
                    s.extras = {strat, ito};
                }
                break;
            }
            case FormulaId::prop54: {
                const auto f_left = sweep_quantity(F_, Quantity::value, grid, x_c);
                const auto dx_f = sweep_quantity(F_, Quantity::vertical, grid, x_c);
                const auto f_mid = sweep_quantity(F_, Quantity::value, grid.refined(), x_r);
                const auto wick = wick_cell_factors(grid, h);
                const auto mass = cell_masses(grid, h);
                double wis = 0.0, strat = 0.0, corr = 0.0;
                for (std::size_t i = 1; i <= n; ++i) {
                    wis += f_left[i - 1] * increment(i) - dx_f[i - 1] * wick[i - 1];
                    strat += f_mid[2 * i - 1] * increment(i);
                    corr += dx_f[i - 1] * mass[i - 1];
                }
                s.residual = wis - (strat - corr);
                s.extras = {strat, corr, strat - corr, wis};
                break;
            }
            case FormulaId::theorem50: {
                const auto dt_f = sweep_quantity(F_, Quantity::horizontal, grid, x_c);
                const auto dx_f = sweep_quantity(F_, Quantity::vertical, grid, x_c);
                const auto dxx_f = sweep_quantity(F_, Quantity::vertical2, grid, x_c);
                const auto wick = wick_cell_factors(grid, h);
                const auto mass = cell_masses(grid, h);
                double drift = 0.0, wis = 0.0, second = 0.0;
                for (std::size_t i = 1; i <= n; ++i) {
                    drift += dt_f[i - 1] * dt;
                    wis += dx_f[i - 1] * increment(i) - dxx_f[i - 1] * wick[i - 1];
                    second += dxx_f[i - 1] * mass[i - 1];
                }
                s.residual = endpoint_change(grid, x_c) - drift - wis - second;
                s.extras = {wis};
                break;
            }
        }
        return s;
    }

private:
    double endpoint_change(const TimeGrid& grid, std::span<const double> x) const {
        return F_.value(StoppedPath(grid, x, grid.steps())) - F_.value(StoppedPath(grid, x, 0));
    }

    // H int_{t_{i-1}}^{t_i} t^{2H-1} dt = (t_i^{2H} - t_{i-1}^{2H}) / 2.
    static std::vector<double> cell_masses(const TimeGrid& grid, HurstParameter h) {
        std::vector<double> out(grid.steps());
        const double p = 2.0 * h.value();
        for (std::size_t i = 1; i <= grid.steps(); ++i) {
            out[i - 1] = 0.5 * (std::pow(grid.time(i), p) - std::pow(grid.time(i - 1), p));
        }
        return out;
    }

    const FormulaCase& c_;
    const Functional& F_;
};

}  // namespace

ResidualReport verify(const FormulaCase& c) {
    validate(c);
    const bool mids = needs_midpoints(c.formula);
    const std::size_t finest = c.ladder.back() * (mids ? 2 : 1);
    const TimeGrid fine_grid(c.horizon, finest);
    const auto generator = make_generator(fine_grid, c.hurst, c.generator);
    const ItoProcessSpec process =
        c.process ? *c.process
                  : ItoProcessSpec::driver_itself(fine_grid, c.hurst.is_brownian() ? DriverKind::brownian
                                                                                   : DriverKind::fbm);
    const Pipeline pipeline(c);
    const std::size_t levels = c.ladder.size();
    const std::size_t n_extra = extra_names(c.formula).size();
    const std::size_t stride = 1 + n_extra;
    std::vector<double> results(c.paths * levels * stride);

    parallel_for(c.paths, c.workers, [&](std::size_t p) {
        NormalSource normals(PathRng(c.seed, p));
        std::vector<double> driver(fine_grid.points());
        generator->sample_into(normals, driver);
        const auto x = c.process ? build_ito_process(process, fine_grid, driver) : driver;
        for (std::size_t l = 0; l < levels; ++l) {
            const std::size_t n = c.ladder[l];
            const std::size_t step = finest / n;
            const auto driver_c = downsample(driver, step);
            const auto x_c = downsample(x, step);
            std::vector<double> x_r;
            if (mids) x_r = downsample(x, step / 2);
            const Sample s = pipeline.run(n, driver_c, x_c, x_r);
            double* out = results.data() + (p * levels + l) * stride;
            out[0] = s.residual;
            for (std::size_t e = 0; e < n_extra; ++e) out[1 + e] = s.extras[e];
        }
    });

    ResidualReport report;
    report.formula = c.formula;
    report.functional = c.functional->name();
    report.hurst = c.hurst.value();
    report.horizon = c.horizon;
    report.paths = c.paths;
    const auto names = extra_names(c.formula);
    const double m = static_cast<double>(c.paths);
    for (std::size_t l = 0; l < levels; ++l) {
        auto column = [&](std::size_t k) {
            std::vector<double> v(c.paths);
            for (std::size_t p = 0; p < c.paths; ++p) v[p] = results[(p * levels + l) * stride + k];
            return v;
        };
        auto mean_se = [&](const std::vector<double>& v) {
            double s = 0.0;
            for (double x : v) s += x;
            const double mean = s / m;
            double ss = 0.0;
            for (double x : v) ss += (x - mean) * (x - mean);
            return std::pair{mean, std::sqrt(ss / (m - 1.0) / m)};
        };
        const auto r = column(0);
        if (std::any_of(r.begin(), r.end(), [](double v) { return !std::isfinite(v); })) {
            throw std::runtime_error(to_string(c.formula) + ": non-finite residual at n = " +
                                     std::to_string(c.ladder[l]));
        }
        ResolutionStats row;
        row.n = c.ladder[l];
        std::tie(row.mean, row.se) = mean_se(r);
        std::vector<double> sq(r.size());
        for (std::size_t p = 0; p < r.size(); ++p) {
            sq[p] = r[p] * r[p];
            row.max_abs = std::max(row.max_abs, std::abs(r[p]));
        }
        const auto [ms, ms_se] = mean_se(sq);
        row.rms = std::sqrt(ms);
        row.rms_se = row.rms > 0.0 ? ms_se / (2.0 * row.rms) : 0.0;
        row.convergence_ratio = l == 0 ? std::numeric_limits<double>::quiet_NaN()
                                       : (report.rows.back().rms > 0.0 ? row.rms / report.rows.back().rms : 0.0);
        for (std::size_t e = 0; e < n_extra; ++e) {
            const auto [mean, se] = mean_se(column(1 + e));
            row.extras.push_back({names[e], mean, se});
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

namespace {

ResidualReport verify_as(FormulaCase c, FormulaId id) {
    c.formula = id;
    return verify(c);
}

}  // namespace

ResidualReport verify_theorem20(FormulaCase c) { return verify_as(std::move(c), FormulaId::theorem20); }
ResidualReport verify_bm_stratonovich_theorem(FormulaCase c) {
    return verify_as(std::move(c), FormulaId::bm_stratonovich);
}
ResidualReport verify_prop43(FormulaCase c) { return verify_as(std::move(c), FormulaId::prop43); }
ResidualReport verify_prop45(FormulaCase c) { return verify_as(std::move(c), FormulaId::prop45); }
ResidualReport verify_theorem32(FormulaCase c) { return verify_as(std::move(c), FormulaId::theorem32); }
ResidualReport verify_prop54(FormulaCase c) { return verify_as(std::move(c), FormulaId::prop54); }
ResidualReport verify_theorem50(FormulaCase c) { return verify_as(std::move(c), FormulaId::theorem50); }

}  // namespace fracito
