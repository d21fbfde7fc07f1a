#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "fracito/fbm.hpp"
#include "fracito/parallel.hpp"
#include "support.hpp"

using namespace fracito;
using testing_support::Gen;
using testing_support::mean_se;
using testing_support::variance_se;
using testing_support::within_se;

TEST_CASE("hurst range") {
    CHECK_NOTHROW(HurstParameter(0.5));
    CHECK(HurstParameter(0.5).is_brownian());
    CHECK_FALSE(HurstParameter(0.7).is_brownian());
    CHECK_THROWS_AS(HurstParameter(0.4), std::invalid_argument);
    CHECK_THROWS_AS(HurstParameter(1.0), std::invalid_argument);
    CHECK_THROWS_AS(HurstParameter(std::nan("")), std::invalid_argument);
}

TEST_CASE("time grid") {
    TimeGrid g(2.0, 8);
    CHECK(g.points() == 9);
    CHECK(g.time(8) == 2.0);
    CHECK(g.spacing() == doctest::Approx(0.25));
    CHECK(g.index_of(0.75) == std::optional<std::size_t>(3));
    CHECK_FALSE(g.index_of(0.8).has_value());
    CHECK(g.refined().refines(g));
    CHECK_FALSE(g.refines(g.refined()));
    CHECK_THROWS_AS(TimeGrid(0.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(TimeGrid(1.0, 0), std::invalid_argument);
}

TEST_CASE("covariance oracles") {
    const HurstParameter h(0.7);
    CHECK(covariance(1.0, 1.0, h) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(covariance(0.0, 0.6, h) == 0.0);
    // independently evaluated and frozen
    CHECK(covariance(0.4, 0.9, h) == doctest::Approx(0.38059357979861186).epsilon(1e-14));
    CHECK(covariance(0.5, 1.0, h) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK_THROWS_AS(covariance(-0.1, 0.5, h), std::domain_error);
}

TEST_CASE("property: covariance symmetric with diagonal t^2H") {
    Gen gen(11);
    for (int i = 0; i < 200; ++i) {
        const HurstParameter h(gen.uniform(0.5, 0.95));
        const double s = gen.uniform(0.0, 3.0), t = gen.uniform(0.0, 3.0);
        CHECK(covariance(s, t, h) == covariance(t, s, h));
        CHECK(covariance(t, t, h) == doctest::Approx(std::pow(t, 2.0 * h.value())).epsilon(1e-13));
    }
}

TEST_CASE("increment autocovariance") {
    const HurstParameter h(0.7);
    const double dt = 0.01;
    CHECK(increment_autocovariance(0, dt, h) == doctest::Approx(std::pow(dt, 1.4)));
    // Cov(B(2dt) - B(dt), B(dt)) from the covariance law
    const double direct = covariance(2 * dt, dt, h) - covariance(dt, dt, h);
    CHECK(increment_autocovariance(1, dt, h) == doctest::Approx(direct).epsilon(1e-12));
    CHECK(increment_autocovariance(3, dt, HurstParameter(0.5)) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("quadratic variation") {
    std::vector<double> zero(10, 0.0);
    CHECK(quadratic_variation(zero) == 0.0);
    std::vector<double> v{0.0, 1.0, 3.0, 2.0};
    CHECK(quadratic_variation(v) == doctest::Approx(1.0 + 4.0 + 1.0));
}

TEST_CASE("single step paths are N(0, T^2H)") {
    for (auto kind : {GeneratorKind::cholesky, GeneratorKind::circulant}) {
        const auto g = make_generator(TimeGrid(1.0, 1), HurstParameter(0.7), kind);
        std::vector<double> end(20000);
        for (std::size_t p = 0; p < end.size(); ++p) end[p] = g->sample(3, p).values[1];
        const auto v = variance_se(end);
        CHECK(within_se(v.mean, 1.0, v.se));
    }
}

TEST_CASE("variance at T within 4 SE, H = 0.75") {
    const auto g = make_generator(TimeGrid(1.0, 256), HurstParameter(0.75));
    const auto bundle = generate_bundle(*g, 20000, 5);
    std::vector<double> end(bundle.count);
    for (std::size_t p = 0; p < bundle.count; ++p) end[p] = bundle.row(p).back();
    const auto v = variance_se(end);
    CHECK(within_se(v.mean, 1.0, v.se));
}

TEST_CASE("empirical covariance at (0.5, 1.0), H = 0.7") {
    const auto g = make_generator(TimeGrid(1.0, 256), HurstParameter(0.7));
    const auto bundle = generate_bundle(*g, 20000, 17);
    std::vector<double> prod(bundle.count);
    for (std::size_t p = 0; p < bundle.count; ++p) prod[p] = bundle.row(p)[128] * bundle.row(p)[256];
    const auto m = mean_se(prod);
    CHECK(within_se(m.mean, covariance(0.5, 1.0, HurstParameter(0.7)), m.se));
}

TEST_CASE("brownian increments are independent with variance dt") {
    const auto g = make_generator(TimeGrid(1.0, 64), HurstParameter(0.5));
    const auto bundle = generate_bundle(*g, 20000, 2);
    std::vector<double> lag0(bundle.count), lag1(bundle.count);
    for (std::size_t p = 0; p < bundle.count; ++p) {
        const auto r = bundle.row(p);
        lag0[p] = (r[11] - r[10]) * (r[11] - r[10]);
        lag1[p] = (r[11] - r[10]) * (r[12] - r[11]);
    }
    const auto a = mean_se(lag0), b = mean_se(lag1);
    CHECK(within_se(a.mean, 1.0 / 64.0, a.se));
    CHECK(within_se(b.mean, 0.0, b.se));
}

TEST_CASE("property: stationary increments at 4 SE") {
    const HurstParameter h(0.65);
    const TimeGrid grid(1.0, 128);
    const auto bundle = generate_bundle(*make_generator(grid, h), 10000, 23);
    Gen gen(4);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t i = gen.index(120), len = 1 + gen.index(8);
        std::vector<double> sq(bundle.count);
        for (std::size_t p = 0; p < bundle.count; ++p) {
            const double d = bundle.row(p)[i + len] - bundle.row(p)[i];
            sq[p] = d * d;
        }
        const auto m = mean_se(sq);
        CHECK(within_se(m.mean, std::pow(len * grid.spacing(), 2.0 * h.value()), m.se));
    }
}

TEST_CASE("generators agree in law: two-sample KS on B(T)") {
    const TimeGrid grid(1.0, 64);
    const HurstParameter h(0.8);
    const auto a = generate_bundle(*make_generator(grid, h, GeneratorKind::cholesky), 4000, 101);
    const auto b = generate_bundle(*make_generator(grid, h, GeneratorKind::circulant), 4000, 202);
    std::vector<double> x, y;
    for (std::size_t p = 0; p < 4000; ++p) {
        x.push_back(a.row(p).back());
        y.push_back(b.row(p).back());
    }
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        if (x[i] <= y[j]) ++i; else ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / x.size() - static_cast<double>(j) / y.size()));
    }
    // critical value at 1%: 1.628 sqrt((n + m) / (n m))
    CHECK(d < 1.628 * std::sqrt(2.0 / 4000.0));
}

TEST_CASE("circulant embedding is nonnegative on typical grids") {
    for (double h : {0.5, 0.6, 0.75, 0.9}) {
        CirculantGenerator g(TimeGrid(1.0, 1024), HurstParameter(h));
        CHECK(g.min_eigenvalue() > -1e-10);
    }
}

TEST_CASE("cholesky cap") {
    CHECK_THROWS_AS(CholeskyGenerator(TimeGrid(1.0, 4096), HurstParameter(0.7)), std::invalid_argument);
    CHECK_NOTHROW(CholeskyGenerator(TimeGrid(1.0, 16), HurstParameter(0.7), 16));
}

TEST_CASE("paths start at zero and are reproducible") {
    const auto g = make_generator(TimeGrid(1.0, 100), HurstParameter(0.7));
    const auto a = g->sample(9, 4), b = g->sample(9, 4), c = g->sample(9, 5);
    CHECK(a.values[0] == 0.0);
    CHECK(a.values == b.values);
    CHECK(a.values != c.values);
    std::vector<double> wrong(5);
    NormalSource n(PathRng(1, 1));
    CHECK_THROWS_AS(g->sample_into(n, wrong), std::invalid_argument);
}

TEST_CASE("bundle independent of worker count") {
    const auto g = make_generator(TimeGrid(1.0, 64), HurstParameter(0.7));
    const auto a = generate_bundle(*g, 257, 77, 1);
    const auto b = generate_bundle(*g, 257, 77, 4);
    CHECK(a.values == b.values);
}

TEST_CASE("refine keeps coarse values") {
    const auto g = make_generator(TimeGrid(1.0, 32), HurstParameter(0.7));
    const auto path = g->sample(1, 0);
    const auto fine = refine(path, 1, 0);
    CHECK(fine.grid == TimeGrid(1.0, 64));
    CHECK(downsample(fine, 2).values == path.values);
}

TEST_CASE("refined variance at T and midpoint law") {
    const HurstParameter h(0.7);
    const auto g = make_generator(TimeGrid(1.0, 1), h);
    std::vector<double> mid(20000), end(20000);
    for (std::size_t p = 0; p < mid.size(); ++p) {
        const auto fine = refine(g->sample(8, p), 9, p);
        mid[p] = fine.values[1];
        end[p] = fine.values[2];
    }
    const auto vm = variance_se(mid), ve = variance_se(end);
    CHECK(within_se(vm.mean, std::pow(0.5, 1.4), vm.se));
    CHECK(within_se(ve.mean, 1.0, ve.se));
    std::vector<double> cross(mid.size());
    for (std::size_t p = 0; p < mid.size(); ++p) cross[p] = mid[p] * end[p];
    const auto c = mean_se(cross);
    CHECK(within_se(c.mean, covariance(0.5, 1.0, h), c.se));
}

TEST_CASE("downsample") {
    std::vector<double> v{0, 1, 2, 3, 4};
    CHECK(downsample(v, 2) == std::vector<double>{0, 2, 4});
    CHECK_THROWS(downsample(v, 3));
}
