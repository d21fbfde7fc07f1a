#include "fracito/path_space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fracito {

// ---------------------------------------------------------------- paths

StoppedPath::StoppedPath(TimeGrid grid, std::span<const double> values, std::size_t cursor)
    : grid_(grid), values_(values), cursor_(cursor), anchor_(cursor) {
    if (cursor > grid.steps()) throw std::out_of_range("stopped path cursor beyond the grid horizon");
    if (values.size() <= cursor) throw std::invalid_argument("stopped path has no sample at its cursor");
}

StoppedPath::StoppedPath(TimeGrid grid, std::vector<double> values, std::size_t cursor)
    : grid_(grid),
      owned_(std::make_shared<const std::vector<double>>(std::move(values))),
      values_(*owned_),
      cursor_(cursor),
      anchor_(cursor) {
    if (cursor > grid.steps()) throw std::out_of_range("stopped path cursor beyond the grid horizon");
    if (values_.size() <= cursor) throw std::invalid_argument("stopped path has no sample at its cursor");
}

double StoppedPath::sup_norm() const {
    double m = 0.0;
    for (std::size_t i = 0; i <= cursor_; ++i) m = std::max(m, std::abs(at(i)));
    return m;
}

StoppedPath StoppedPath::bumped(double h) const {
    StoppedPath out = *this;
    out.tip_shift_ += h;
    return out;
}

StoppedPath StoppedPath::extended(std::size_t s) const {
    if (s < cursor_) throw std::domain_error("horizontal extension must not move backwards in time");
    if (s > grid_.steps()) throw std::out_of_range("horizontal extension beyond the grid horizon");
    if (s == cursor_) return *this;
    if (tip_shift_ != 0.0 && cursor_ != anchor_) return materialized().extended(s);
    StoppedPath out = *this;
    out.flat_shift_ += out.tip_shift_;
    out.tip_shift_ = 0.0;
    out.cursor_ = s;
    return out;
}

StoppedPath StoppedPath::materialized() const {
    std::vector<double> v(cursor_ + 1);
    for (std::size_t i = 0; i <= cursor_; ++i) v[i] = at(i);
    return StoppedPath(grid_, std::move(v), cursor_);
}

StoppedPath StoppedPath::upsampled(std::size_t factor) const {
    if (factor == 0) throw std::invalid_argument("upsampling factor must be positive");
    std::vector<double> v(cursor_ * factor + 1);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = at(i / factor);
    return StoppedPath(grid_.refined(factor), std::move(v), cursor_ * factor);
}

StoppedPath vertical_bump(const StoppedPath& path, double h) { return path.bumped(h); }

StoppedPath horizontal_extend(const StoppedPath& path, double s) {
    if (s < path.time() - 1e-12 * std::max(1.0, path.time())) {
        throw std::domain_error("horizontal_extend: target time precedes the path's current time");
    }
    const auto k = path.grid().index_of(s);
    if (!k) throw std::invalid_argument("horizontal_extend: target time is not on the grid");
    return path.extended(std::max(*k, path.cursor()));
}

double d_infty(const StoppedPath& a, const StoppedPath& b) {
    const TimeGrid& ga = a.grid();
    const TimeGrid& gb = b.grid();
    const TimeGrid* fine = nullptr;
    if (ga.refines(gb)) {
        fine = &ga;
    } else if (gb.refines(ga)) {
        fine = &gb;
    } else {
        throw std::invalid_argument("d_infty: grids have no common refinement");
    }
    const std::size_t ra = fine->steps() / ga.steps();
    const std::size_t rb = fine->steps() / gb.steps();
    const std::size_t last = std::max(a.cursor() * ra, b.cursor() * rb);
    double gap = 0.0;
    for (std::size_t r = 0; r <= last; ++r) {
        const double va = a.at(std::min(r / ra, a.cursor()));
        const double vb = b.at(std::min(r / rb, b.cursor()));
        gap = std::max(gap, std::abs(va - vb));
    }
    return gap + std::abs(a.time() - b.time());
}

std::string to_string(Quantity q) {
    switch (q) {
        case Quantity::value: return "value";
        case Quantity::horizontal: return "horizontal";
        case Quantity::vertical: return "vertical";
        case Quantity::vertical2: return "vertical2";
    }
    return "?";
}

std::string to_string(Smoothness s) {
    switch (s) {
        case Smoothness::C00: return "C00";
        case Smoothness::C11: return "C11";
        case Smoothness::C12: return "C12";
    }
    return "?";
}

std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::closed_form: return "closed_form";
        case Scheme::forward: return "forward";
        case Scheme::central: return "central";
    }
    return "?";
}

// ----------------------------------------------------------- functional

double Functional::closed_form(Quantity q, const StoppedPath& path) const {
    if (q == Quantity::value) return value(path);
    throw std::logic_error(name() + " has no closed-form " + to_string(q) + " derivative");
}

void Functional::sweep(Quantity q, const TimeGrid& grid, std::span<const double> values,
                       std::span<double> out) const {
    for (std::size_t k = 0; k < values.size(); ++k) {
        out[k] = closed_form(q, StoppedPath(grid, values, k));
    }
}

// ---------------------------------------------------------- derivatives

namespace {

void require_differentiable(const Functional& f) {
    if (f.smoothness() == Smoothness::C00) {
        throw std::domain_error(f.name() + " is only continuous; derivative queries are not defined");
    }
}

double checked(double v, const char* what) {
    if (!std::isfinite(v)) throw std::runtime_error(std::string(what) + ": non-finite functional evaluation");
    return v;
}

double default_bump(const StoppedPath& path) {
    return kVerticalRelativeBump * std::max(1.0, path.sup_norm());
}

}  // namespace

DerivativeEstimate horizontal_derivative(const Functional& f, const StoppedPath& path) {
    require_differentiable(f);
    if (f.has_closed_form(Quantity::horizontal)) {
        return {checked(f.closed_form(Quantity::horizontal, path), "horizontal_derivative"), 0.0,
                Scheme::closed_form};
    }
    if (path.cursor() >= path.grid().steps()) {
        throw std::domain_error("horizontal_derivative: path is stopped at the horizon and " + f.name() +
                                " has no closed form");
    }
    const double h = path.grid().spacing();
    const double base = f.value(path);
    const double coarse = (f.value(path.extended(path.cursor() + 1)) - base) / h;
    // Richardson step on the twice-refined step path: extending by h/2.
    const StoppedPath fine = path.upsampled(2);
    const double half = (f.value(fine.extended(fine.cursor() + 1)) - f.value(fine)) / (0.5 * h);
    return {checked(2.0 * half - coarse, "horizontal_derivative"), h, Scheme::forward};
}

DerivativeEstimate vertical_derivative(const Functional& f, const StoppedPath& path, std::optional<double> bump) {
    require_differentiable(f);
    if (f.has_closed_form(Quantity::vertical)) {
        return {checked(f.closed_form(Quantity::vertical, path), "vertical_derivative"), 0.0,
                Scheme::closed_form};
    }
    const double h = bump.value_or(default_bump(path));
    const double up = checked(f.value(path.bumped(h)), "vertical_derivative");
    const double down = checked(f.value(path.bumped(-h)), "vertical_derivative");
    return {(up - down) / (2.0 * h), h, Scheme::central};
}

DerivativeEstimate vertical_second(const Functional& f, const StoppedPath& path, std::optional<double> bump) {
    require_differentiable(f);
    if (f.has_closed_form(Quantity::vertical2)) {
        return {checked(f.closed_form(Quantity::vertical2, path), "vertical_second"), 0.0, Scheme::closed_form};
    }
    const double h = bump.value_or(default_bump(path));
    const double up = checked(f.value(path.bumped(h)), "vertical_second");
    const double mid = checked(f.value(path), "vertical_second");
    const double down = checked(f.value(path.bumped(-h)), "vertical_second");
    return {(up - 2.0 * mid + down) / (h * h), h, Scheme::central};
}

void sweep_quantity(const Functional& f, Quantity q, const TimeGrid& grid, std::span<const double> values,
                    std::span<double> out) {
    if (out.size() != values.size()) throw std::invalid_argument("sweep: output length mismatch");
    if (f.has_closed_form(q)) {
        f.sweep(q, grid, values, out);
        return;
    }
    for (std::size_t k = 0; k < values.size(); ++k) {
        const StoppedPath p(grid, values, k);
        switch (q) {
            case Quantity::value: out[k] = f.value(p); break;
            case Quantity::horizontal:
                out[k] = k < grid.steps() ? horizontal_derivative(f, p).value : out[k - 1];
                break;
            case Quantity::vertical: out[k] = vertical_derivative(f, p).value; break;
            case Quantity::vertical2: out[k] = vertical_second(f, p).value; break;
        }
    }
}

std::vector<double> sweep_quantity(const Functional& f, Quantity q, const TimeGrid& grid,
                                   std::span<const double> values) {
    std::vector<double> out(values.size());
    sweep_quantity(f, q, grid, values, out);
    return out;
}

// ------------------------------------------------------------- builtins

namespace {

class Cylindrical final : public Functional {
public:
    explicit Cylindrical(CylindricalSpec spec) : spec_(std::move(spec)) {
        if (!spec_.f) throw std::invalid_argument("cylindrical functional needs f");
    }

    std::string name() const override { return spec_.name.empty() ? "cylindrical" : spec_.name; }

    Smoothness smoothness() const override {
        if (spec_.f_t && spec_.f_x && spec_.f_xx) return Smoothness::C12;
        if (spec_.f_t && spec_.f_x) return Smoothness::C11;
        // Derivatives are still obtainable by finite differences.
        return Smoothness::C12;
    }

    double value(const StoppedPath& p) const override { return spec_.f(p.time(), p.current()); }

    bool has_closed_form(Quantity q) const override { return static_cast<bool>(pick(q)); }

    double closed_form(Quantity q, const StoppedPath& p) const override {
        const auto& g = pick(q);
        if (!g) return Functional::closed_form(q, p);
        return g(p.time(), p.current());
    }

    void sweep(Quantity q, const TimeGrid& grid, std::span<const double> values,
               std::span<double> out) const override {
        const auto& g = pick(q);
        if (!g) {
            Functional::sweep(q, grid, values, out);
            return;
        }
        for (std::size_t k = 0; k < values.size(); ++k) out[k] = g(grid.time(k), values[k]);
    }

private:
    const std::function<double(double, double)>& pick(Quantity q) const {
        switch (q) {
            case Quantity::value: return spec_.f;
            case Quantity::horizontal: return spec_.f_t;
            case Quantity::vertical: return spec_.f_x;
            case Quantity::vertical2: return spec_.f_xx;
        }
        return spec_.f;
    }

    CylindricalSpec spec_;
};

double left_integral(const StoppedPath& p) {
    const double dt = p.grid().spacing();
    double acc = 0.0;
    for (std::size_t j = 0; j < p.cursor(); ++j) acc += p.at(j);
    return acc * dt;
}

class RunningIntegral final : public Functional {
public:
    std::string name() const override { return "running_integral"; }
    Smoothness smoothness() const override { return Smoothness::C12; }
    double value(const StoppedPath& p) const override { return left_integral(p); }
    bool has_closed_form(Quantity) const override { return true; }

    double closed_form(Quantity q, const StoppedPath& p) const override {
        switch (q) {
            case Quantity::value: return value(p);
            case Quantity::horizontal: return p.current();
            default: return 0.0;
        }
    }

    void sweep(Quantity q, const TimeGrid& grid, std::span<const double> values,
               std::span<double> out) const override {
        const double dt = grid.spacing();
        if (q == Quantity::value) {
            double acc = 0.0;
            for (std::size_t k = 0; k < values.size(); ++k) {
                out[k] = acc * dt;
                acc += values[k];
            }
        } else if (q == Quantity::horizontal) {
            std::copy(values.begin(), values.end(), out.begin());
        } else {
            std::fill(out.begin(), out.end(), 0.0);
        }
    }
};

class ProductIntegral final : public Functional {
public:
    std::string name() const override { return "product_integral"; }
    Smoothness smoothness() const override { return Smoothness::C12; }
    double value(const StoppedPath& p) const override { return p.current() * left_integral(p); }
    bool has_closed_form(Quantity) const override { return true; }

    double closed_form(Quantity q, const StoppedPath& p) const override {
        switch (q) {
            case Quantity::value: return value(p);
            case Quantity::horizontal: return p.current() * p.current();
            case Quantity::vertical: return left_integral(p);
            case Quantity::vertical2: return 0.0;
        }
        return 0.0;
    }

    void sweep(Quantity q, const TimeGrid& grid, std::span<const double> values,
               std::span<double> out) const override {
        const double dt = grid.spacing();
        double acc = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double integral = acc * dt;
            switch (q) {
                case Quantity::value: out[k] = values[k] * integral; break;
                case Quantity::horizontal: out[k] = values[k] * values[k]; break;
                case Quantity::vertical: out[k] = integral; break;
                case Quantity::vertical2: out[k] = 0.0; break;
            }
            acc += values[k];
        }
    }
};

class WeightedIntegral final : public Functional {
public:
    explicit WeightedIntegral(StepFunction xi) : xi_(std::move(xi)) {}

    std::string name() const override { return "weighted_integral"; }
    Smoothness smoothness() const override { return Smoothness::C12; }

    double value(const StoppedPath& p) const override {
        double acc = 0.0;
        for (std::size_t j = 0; j < p.cursor(); ++j) {
            acc += xi_(p.grid().time(j)) * (p.at(j + 1) - p.at(j));
        }
        return acc;
    }

    bool has_closed_form(Quantity) const override { return true; }

    double closed_form(Quantity q, const StoppedPath& p) const override {
        switch (q) {
            case Quantity::value: return value(p);
            case Quantity::vertical:
                return p.cursor() == 0 ? 0.0 : xi_(p.grid().time(p.cursor() - 1));
            default: return 0.0;
        }
    }

    void sweep(Quantity q, const TimeGrid& grid, std::span<const double> values,
               std::span<double> out) const override {
        double acc = 0.0;
        out[0] = 0.0;
        for (std::size_t k = 1; k < values.size(); ++k) {
            const double w = xi_(grid.time(k - 1));
            acc += w * (values[k] - values[k - 1]);
            switch (q) {
                case Quantity::value: out[k] = acc; break;
                case Quantity::vertical: out[k] = w; break;
                default: out[k] = 0.0; break;
            }
        }
    }

private:
    StepFunction xi_;
};

class RunningMax final : public Functional {
public:
    std::string name() const override { return "running_max"; }
    Smoothness smoothness() const override { return Smoothness::C00; }

    double value(const StoppedPath& p) const override {
        double m = p.at(0);
        for (std::size_t j = 1; j <= p.cursor(); ++j) m = std::max(m, p.at(j));
        return m;
    }

    void sweep(Quantity q, const TimeGrid& grid, std::span<const double> values,
               std::span<double> out) const override {
        if (q != Quantity::value) {
            Functional::sweep(q, grid, values, out);
            return;
        }
        double m = values[0];
        for (std::size_t k = 0; k < values.size(); ++k) {
            m = std::max(m, values[k]);
            out[k] = m;
        }
    }
};

class LinearCombination final : public Functional {
public:
    LinearCombination(std::vector<FunctionalPtr> terms, std::vector<double> coefficients)
        : terms_(std::move(terms)), coefficients_(std::move(coefficients)) {
        if (terms_.empty() || terms_.size() != coefficients_.size()) {
            throw std::invalid_argument("linear combination needs one coefficient per term");
        }
    }

    std::string name() const override {
        std::string s = "linear_combination(";
        for (std::size_t i = 0; i < terms_.size(); ++i) s += (i ? "," : "") + terms_[i]->name();
        return s + ")";
    }

    Smoothness smoothness() const override {
        Smoothness s = Smoothness::C12;
        for (const auto& t : terms_) s = std::min(s, t->smoothness());
        return s;
    }

    double value(const StoppedPath& p) const override {
        double acc = 0.0;
        for (std::size_t i = 0; i < terms_.size(); ++i) acc += coefficients_[i] * terms_[i]->value(p);
        return acc;
    }

    bool has_closed_form(Quantity q) const override {
        return std::all_of(terms_.begin(), terms_.end(), [q](const auto& t) { return t->has_closed_form(q); });
    }

    double closed_form(Quantity q, const StoppedPath& p) const override {
        if (!has_closed_form(q)) return Functional::closed_form(q, p);
        double acc = 0.0;
        for (std::size_t i = 0; i < terms_.size(); ++i) acc += coefficients_[i] * terms_[i]->closed_form(q, p);
        return acc;
    }

    void sweep(Quantity q, const TimeGrid& grid, std::span<const double> values,
               std::span<double> out) const override {
        if (!has_closed_form(q)) {
            Functional::sweep(q, grid, values, out);
            return;
        }
        std::fill(out.begin(), out.end(), 0.0);
        std::vector<double> buf(values.size());
        for (std::size_t i = 0; i < terms_.size(); ++i) {
            terms_[i]->sweep(q, grid, values, buf);
            for (std::size_t k = 0; k < values.size(); ++k) out[k] += coefficients_[i] * buf[k];
        }
    }

private:
    std::vector<FunctionalPtr> terms_;
    std::vector<double> coefficients_;
};

class DerivativeOf final : public Functional {
public:
    DerivativeOf(FunctionalPtr f, Quantity q) : f_(std::move(f)), q_(q) {
        if (q == Quantity::value) throw std::invalid_argument("derivative_functional needs a derivative quantity");
        require_differentiable(*f_);
    }

    std::string name() const override { return "d" + to_string(q_) + "(" + f_->name() + ")"; }

    Smoothness smoothness() const override {
        if (q_ == Quantity::vertical && f_->smoothness() == Smoothness::C12) return Smoothness::C11;
        return Smoothness::C00;
    }

    double value(const StoppedPath& p) const override {
        switch (q_) {
            case Quantity::horizontal: return horizontal_derivative(*f_, p).value;
            case Quantity::vertical: return vertical_derivative(*f_, p).value;
            default: return vertical_second(*f_, p).value;
        }
    }

    bool has_closed_form(Quantity q) const override {
        if (q == Quantity::value) return f_->has_closed_form(q_);
        if (q == Quantity::vertical && q_ == Quantity::vertical) return f_->has_closed_form(Quantity::vertical2);
        return false;
    }

    double closed_form(Quantity q, const StoppedPath& p) const override {
        if (q == Quantity::value) return f_->has_closed_form(q_) ? f_->closed_form(q_, p) : value(p);
        if (q == Quantity::vertical && q_ == Quantity::vertical) return f_->closed_form(Quantity::vertical2, p);
        return Functional::closed_form(q, p);
    }

    void sweep(Quantity q, const TimeGrid& grid, std::span<const double> values,
               std::span<double> out) const override {
        if (q == Quantity::value) {
            sweep_quantity(*f_, q_, grid, values, out);
        } else if (q == Quantity::vertical && q_ == Quantity::vertical) {
            sweep_quantity(*f_, Quantity::vertical2, grid, values, out);
        } else {
            Functional::sweep(q, grid, values, out);
        }
    }

private:
    FunctionalPtr f_;
    Quantity q_;
};

}  // namespace

FunctionalPtr cylindrical(CylindricalSpec spec) { return std::make_shared<Cylindrical>(std::move(spec)); }

FunctionalPtr constant(double c) {
    auto zero = [](double, double) { return 0.0; };
    return cylindrical({"constant", [c](double, double) { return c; }, zero, zero, zero});
}

FunctionalPtr identity() {
    auto zero = [](double, double) { return 0.0; };
    return cylindrical({"identity", [](double, double x) { return x; }, zero,
                        [](double, double) { return 1.0; }, zero});
}

FunctionalPtr square() {
    return cylindrical({"square", [](double, double x) { return x * x; }, [](double, double) { return 0.0; },
                        [](double, double x) { return 2.0 * x; }, [](double, double) { return 2.0; }});
}

FunctionalPtr running_integral() { return std::make_shared<RunningIntegral>(); }
FunctionalPtr weighted_integral(StepFunction xi) { return std::make_shared<WeightedIntegral>(std::move(xi)); }
FunctionalPtr running_max() { return std::make_shared<RunningMax>(); }
FunctionalPtr product_integral() { return std::make_shared<ProductIntegral>(); }

FunctionalPtr linear_combination(std::vector<FunctionalPtr> terms, std::vector<double> coefficients) {
    return std::make_shared<LinearCombination>(std::move(terms), std::move(coefficients));
}

FunctionalPtr derivative_functional(FunctionalPtr f, Quantity q) {
    return std::make_shared<DerivativeOf>(std::move(f), q);
}

}  // namespace fracito
