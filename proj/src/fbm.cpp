#include "fracito/fbm.hpp"

#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <tuple>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/FFT>

#include "fracito/parallel.hpp"

namespace fracito {

std::size_t default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

HurstParameter::HurstParameter(double h) : h_(h) {
    if (!(h >= 0.5 && h < 1.0)) {
        throw std::invalid_argument("Hurst parameter must lie in [0.5, 1), got " + std::to_string(h));
    }
}

TimeGrid::TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw std::invalid_argument("time grid horizon must be positive and finite");
    }
    if (steps == 0) throw std::invalid_argument("time grid needs at least one step");
}

std::optional<std::size_t> TimeGrid::index_of(double t, double tol) const {
    const double x = t / spacing();
    const double r = std::round(x);
    if (r < 0.0 || r > static_cast<double>(steps_)) return std::nullopt;
    if (std::abs(x - r) > tol * std::max(1.0, std::abs(x))) return std::nullopt;
    return static_cast<std::size_t>(r);
}

bool TimeGrid::refines(const TimeGrid& coarse) const {
    return horizon_ == coarse.horizon_ && steps_ % coarse.steps_ == 0;
}

double covariance(double s, double t, HurstParameter h) {
    if (s < 0.0 || t < 0.0) throw std::domain_error("covariance: times must be nonnegative");
    const double two_h = 2.0 * h.value();
    return 0.5 * (std::pow(t, two_h) + std::pow(s, two_h) - std::pow(std::abs(t - s), two_h));
}

double increment_autocovariance(std::size_t lag, double dt, HurstParameter h) {
    const double two_h = 2.0 * h.value();
    const double k = static_cast<double>(lag);
    const double unit = 0.5 * (std::pow(k + 1.0, two_h) + std::pow(std::abs(k - 1.0), two_h) -
                               2.0 * std::pow(k, two_h));
    return unit * std::pow(dt, two_h);
}

double quadratic_variation(std::span<const double> values) {
    double qv = 0.0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        const double d = values[i] - values[i - 1];
        qv += d * d;
    }
    return qv;
}

std::string to_string(GeneratorKind kind) {
    return kind == GeneratorKind::cholesky ? "cholesky" : "circulant";
}

FbmPath FbmGenerator::sample(std::uint64_t master_seed, std::uint64_t path_index) const {
    FbmPath path{grid_, std::vector<double>(grid_.points()), hurst_, path_index};
    NormalSource normals(PathRng(master_seed, path_index));
    sample_into(normals, path.values);
    return path;
}

namespace {

using CacheKey = std::tuple<double, std::size_t, double>;

CacheKey key_of(const TimeGrid& grid, HurstParameter h) {
    return {grid.horizon(), grid.steps(), h.value()};
}

void check_span(std::span<double> out, const TimeGrid& grid) {
    if (out.size() != grid.points()) {
        throw std::invalid_argument("output span length does not match the generator grid");
    }
}

}  // namespace

// ---------------------------------------------------------------- Cholesky

struct CholeskyGenerator::Factor {
    Eigen::MatrixXd lower;
};

CholeskyGenerator::CholeskyGenerator(TimeGrid grid, HurstParameter hurst, std::size_t max_steps)
    : FbmGenerator(grid, hurst) {
    const std::size_t n = grid.steps();
    if (n > max_steps) {
        throw std::invalid_argument("Cholesky generator limited to " + std::to_string(max_steps) +
                                    " steps; use the circulant generator for n = " + std::to_string(n));
    }
    static std::mutex cache_mutex;
    static std::map<CacheKey, std::shared_ptr<const Factor>> cache;
    {
        std::lock_guard lock(cache_mutex);
        if (auto it = cache.find(key_of(grid, hurst)); it != cache.end()) {
            factor_ = it->second;
            return;
        }
    }
    const double dt = grid.spacing();
    std::vector<double> rho(n);
    for (std::size_t k = 0; k < n; ++k) rho[k] = increment_autocovariance(k, dt, hurst);
    Eigen::MatrixXd cov(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cov(i, j) = rho[i > j ? i - j : j - i];
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("increment covariance is not numerically positive definite for n = " +
                             std::to_string(n) + "; use the circulant generator");
    }
    auto factor = std::make_shared<Factor>();
    factor->lower = llt.matrixL();
    std::lock_guard lock(cache_mutex);
    factor_ = cache.emplace(key_of(grid, hurst), std::move(factor)).first->second;
}

void CholeskyGenerator::sample_into(NormalSource& normals, std::span<double> out) const {
    check_span(out, grid());
    const auto& lower = factor_->lower;
    const Eigen::Index n = lower.rows();
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normals();
    const Eigen::VectorXd inc = lower.triangularView<Eigen::Lower>() * z;
    out[0] = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) out[i + 1] = out[i] + inc[i];
}

// --------------------------------------------------------------- Circulant

CirculantGenerator::CirculantGenerator(TimeGrid grid, HurstParameter hurst, double eigenvalue_tolerance)
    : FbmGenerator(grid, hurst) {
    const std::size_t n = grid.steps();
    const std::size_t m = 2 * n;
    const double dt = grid.spacing();
    std::vector<std::complex<double>> row(m), eig(m);
    for (std::size_t k = 0; k <= n; ++k) row[k] = increment_autocovariance(k, dt, hurst);
    for (std::size_t k = 1; k < n; ++k) row[m - k] = row[k];
    Eigen::FFT<double> fft;
    fft.fwd(eig, row);
    double max_eig = 0.0;
    min_eigenvalue_ = eig[0].real();
    for (const auto& e : eig) {
        max_eig = std::max(max_eig, e.real());
        min_eigenvalue_ = std::min(min_eigenvalue_, e.real());
    }
    if (min_eigenvalue_ < -eigenvalue_tolerance * max_eig) {
        throw NumericalError("circulant embedding has a negative eigenvalue (" +
                             std::to_string(min_eigenvalue_) + "); fall back to the Cholesky generator");
    }
    scale_.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        scale_[k] = std::sqrt(std::max(0.0, eig[k].real()) / static_cast<double>(m));
    }
}

void CirculantGenerator::sample_into(NormalSource& normals, std::span<double> out) const {
    check_span(out, grid());
    const std::size_t m = scale_.size();
    const std::size_t n = m / 2;
    std::vector<std::complex<double>> z(m), w(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double re = normals();
        const double im = normals();
        z[k] = {scale_[k] * re, scale_[k] * im};
    }
    Eigen::FFT<double> fft;
    fft.fwd(w, z);
    out[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) out[i + 1] = out[i] + w[i].real();
}

std::shared_ptr<const FbmGenerator> make_generator(TimeGrid grid, HurstParameter hurst, GeneratorKind kind) {
    if (kind == GeneratorKind::cholesky) return std::make_shared<CholeskyGenerator>(grid, hurst);
    return std::make_shared<CirculantGenerator>(grid, hurst);
}

// ----------------------------------------------------------------- Refiner

struct MidpointRefiner::Law {
    Eigen::MatrixXd mean_map;  // midpoints given coarse values t_1..t_n
    Eigen::MatrixXd lower;     // factor of the conditional covariance
};

MidpointRefiner::MidpointRefiner(TimeGrid coarse, HurstParameter hurst, std::size_t max_steps)
    : coarse_(coarse), hurst_(hurst) {
    const std::size_t n = coarse.steps();
    if (n > max_steps) {
        throw std::invalid_argument("midpoint refinement limited to " + std::to_string(max_steps) +
                                    " steps; generate on the doubled grid instead");
    }
    static std::mutex cache_mutex;
    static std::map<CacheKey, std::shared_ptr<const Law>> cache;
    {
        std::lock_guard lock(cache_mutex);
        if (auto it = cache.find(key_of(coarse, hurst)); it != cache.end()) {
            law_ = it->second;
            return;
        }
    }
    const TimeGrid fine = coarse.refined();
    Eigen::MatrixXd cc(n, n), mc(n, n), mm(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double ci = coarse.time(i + 1);
        const double mi = fine.time(2 * i + 1);
        for (std::size_t j = 0; j < n; ++j) {
            cc(i, j) = covariance(ci, coarse.time(j + 1), hurst);
            mc(i, j) = covariance(mi, coarse.time(j + 1), hurst);
            mm(i, j) = covariance(mi, fine.time(2 * j + 1), hurst);
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cc);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("coarse covariance is not numerically positive definite");
    }
    auto law = std::make_shared<Law>();
    law->mean_map = llt.solve(mc.transpose()).transpose();
    Eigen::MatrixXd cond = mm - law->mean_map * mc.transpose();
    cond = 0.5 * (cond + cond.transpose());
    Eigen::LLT<Eigen::MatrixXd> cond_llt(cond);
    if (cond_llt.info() == Eigen::Success) {
        law->lower = cond_llt.matrixL();
    } else {
        // Symmetric square root with negative rounding noise clipped.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cond);
        const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        law->lower = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
    }
    std::lock_guard lock(cache_mutex);
    law_ = cache.emplace(key_of(coarse, hurst), std::move(law)).first->second;
}

std::vector<double> MidpointRefiner::refine(std::span<const double> coarse_values, NormalSource& normals) const {
    const std::size_t n = coarse_.steps();
    if (coarse_values.size() != n + 1) {
        throw std::invalid_argument("refine: path length does not match the coarse grid");
    }
    Eigen::VectorXd c(n), z(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = coarse_values[i + 1] - coarse_values[0];
    for (std::size_t i = 0; i < n; ++i) z[i] = normals();
    const Eigen::VectorXd mid = law_->mean_map * c + law_->lower * z;
    std::vector<double> out(2 * n + 1);
    for (std::size_t i = 0; i <= n; ++i) out[2 * i] = coarse_values[i];
    for (std::size_t i = 0; i < n; ++i) out[2 * i + 1] = coarse_values[0] + mid[i];
    return out;
}

FbmPath refine(const FbmPath& path, std::uint64_t master_seed, std::uint64_t path_index) {
    MidpointRefiner refiner(path.grid, path.hurst);
    NormalSource normals(PathRng(master_seed, path_index));
    return FbmPath{path.grid.refined(), refiner.refine(path.values, normals), path.hurst, path.seed_tag};
}

std::vector<double> downsample(std::span<const double> values, std::size_t factor) {
    if (factor == 0 || values.empty() || (values.size() - 1) % factor != 0) {
        throw std::invalid_argument("downsample: factor must divide the number of steps");
    }
    std::vector<double> out((values.size() - 1) / factor + 1);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = values[i * factor];
    return out;
}

FbmPath downsample(const FbmPath& path, std::size_t factor) {
    auto values = downsample(path.values, factor);
    return FbmPath{TimeGrid(path.grid.horizon(), path.grid.steps() / factor), std::move(values), path.hurst,
                   path.seed_tag};
}

PathBundle generate_bundle(const FbmGenerator& generator, std::size_t count, std::uint64_t master_seed,
                           std::size_t workers) {
    PathBundle bundle{generator.grid(), generator.hurst(), count, master_seed, {}};
    bundle.values.resize(count * generator.grid().points());
    parallel_for(count, workers, [&](std::size_t i) {
        NormalSource normals(PathRng(master_seed, i));
        generator.sample_into(normals, bundle.row(i));
    });
    return bundle;
}

}  // namespace fracito
