#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fracito/integrators.hpp"
#include "fracito/malliavin.hpp"
#include "support.hpp"

using namespace fracito;
using testing_support::Gen;
using testing_support::mean_se;
using testing_support::within_se;

namespace {

const HurstParameter kH(0.7);

}  // namespace

TEST_CASE("constant integrands telescope") {
    Gen gen(1);
    const TimeGrid g(1.0, 16);
    const auto b = gen.walk(17);
    const auto bf = gen.walk(33);
    const auto c = constant(2.0);
    CHECK(ito_type_sum(*c, g, b, b).value == doctest::Approx(2.0 * b.back()));
    CHECK(stratonovich_sum(*c, g, bf, bf).value == doctest::Approx(2.0 * bf.back()));
    CHECK(wis_sum(*constant(1.0), g, b, kH).value == doctest::Approx(b.back()));
}

TEST_CASE("property: left-point sum of gamma is (B_T^2 - QV) / 2 pathwise") {
    Gen gen(2);
    for (int i = 0; i < 50; ++i) {
        const std::size_t n = 1 + gen.index(200);
        const auto b = gen.walk(n + 1, gen.uniform(0.01, 1.0));
        const TimeGrid g(gen.uniform(0.5, 3.0), n);
        const double ito = ito_type_sum(*identity(), g, b, b).value;
        CHECK(ito == doctest::Approx(0.5 * (b.back() * b.back() - quadratic_variation(b))).epsilon(1e-10));
    }
}

TEST_CASE("property: wis sum = left-point sum - Wick corrections") {
    Gen gen(3);
    for (int i = 0; i < 30; ++i) {
        const std::size_t n = 2 + gen.index(100);
        const TimeGrid g(1.0, n);
        const auto b = gen.walk(n + 1);
        for (const auto& f : {identity(), square(), product_integral()}) {
            const auto dx = sweep_quantity(*f, Quantity::vertical, g, b);
            const double lhs = wis_sum(*f, g, b, kH).value;
            const double rhs = ito_type_sum(*f, g, b, b).value - wick_correction_sum(dx, g, kH);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        }
    }
}

TEST_CASE("deterministic driver Riemann sum") {
    const TimeGrid g(1.0, 4096);
    std::vector<double> t(g.points());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = g.time(i);
    CHECK(ito_type_sum(*identity(), g, t, t).value == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("stratonovich needs the doubled grid") {
    const TimeGrid g(1.0, 8);
    std::vector<double> coarse(9, 0.0);
    CHECK_THROWS_AS(stratonovich_sum(*identity(), g, coarse, coarse), std::invalid_argument);
    std::vector<double> fine(17, 0.0), w(3, 1.0);
    CHECK_THROWS_AS(stratonovich_sum(*identity(), g, fine, fine, w), std::invalid_argument);
}

TEST_CASE("wis rejects continuous-only integrands") {
    const TimeGrid g(1.0, 8);
    std::vector<double> b(9, 0.0);
    CHECK_THROWS_AS(wis_sum(*running_max(), g, b, kH), std::domain_error);
    CHECK_THROWS_AS(wis_sum(*identity(), g, std::vector<double>(4, 0.0), kH), std::invalid_argument);
}

TEST_CASE("wick cell factors") {
    const TimeGrid g(1.0, 4);
    const auto f = wick_cell_factors(g, HurstParameter(0.75));
    CHECK(f[0] == 0.0);
    CHECK(f[2] == doctest::Approx(0.08548283112252761).epsilon(1e-12));
    for (double x : wick_cell_factors(g, HurstParameter(0.5))) CHECK(x == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("wis mean zero and closed form") {
    const TimeGrid g(1.0, 1024);
    const auto gen = make_generator(g, kH);
    std::vector<double> w(4000), gap(4000);
    for (std::size_t p = 0; p < w.size(); ++p) {
        const auto path = gen->sample(41, p);
        w[p] = wis_sum(*identity(), path).value;
        gap[p] = w[p] - 0.5 * (path.values.back() * path.values.back() - 1.0);
    }
    const auto m = mean_se(w);
    CHECK(within_se(m.mean, 0.0, m.se));
    double ss = 0.0;
    for (double x : gap) ss += x * x;
    CHECK(std::sqrt(ss / gap.size()) < 0.05);
}

TEST_CASE("midpoint minus left point: Brownian gives T/2, fBm vanishes") {
    for (double hv : {0.5, 0.7}) {
        const HurstParameter h(hv);
        const TimeGrid g(1.0, 512);
        const auto gen = make_generator(g.refined(), h);
        std::vector<double> d(1000);
        for (std::size_t p = 0; p < d.size(); ++p) {
            const auto fine = gen->sample(5, p).values;
            const auto coarse = downsample(fine, 2);
            d[p] = stratonovich_sum(*identity(), g, fine, fine).value - ito_type_sum(*identity(), g, coarse, coarse).value;
        }
        const auto m = mean_se(d);
        if (hv == 0.5) {
            CHECK(within_se(m.mean, 0.5, m.se));
        } else {
            // E = sum_i <1_[t_{i-1}, m_i], 1_[t_{i-1}, t_i]> -> 0 like n^{1-2H}
            CHECK(std::abs(m.mean) < 0.05);
        }
    }
}

TEST_CASE("property: dyadic Cauchy differences shrink on coupled paths") {
    const HurstParameter h(0.7);
    const std::size_t nmax = 1024;
    const auto gen = make_generator(TimeGrid(1.0, 2 * nmax), h);
    std::vector<double> d1, d2;
    for (std::size_t p = 0; p < 400; ++p) {
        const auto v = gen->sample(6, p).values;
        auto strat = [&](std::size_t n) {
            return stratonovich_sum(*square(), TimeGrid(1.0, n), downsample(v, nmax / n), downsample(v, nmax / n)).value;
        };
        const double a = strat(256), b = strat(512), c = strat(1024);
        d1.push_back((b - a) * (b - a));
        d2.push_back((c - b) * (c - b));
    }
    CHECK(mean_se(d2).mean < mean_se(d1).mean);
}

TEST_CASE("driven process") {
    const TimeGrid g(1.0, 4);
    const std::vector<double> b{0, 0.1, -0.2, 0.3, 0.5};
    const auto x = build_ito_process(ItoProcessSpec::driver_itself(g, DriverKind::fbm, 1.0), g, b);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(x[i] == doctest::Approx(1.0 + b[i]));
    const ItoProcessSpec drift{0.5, StepFunction::constant(g, 1.0), StepFunction::constant(g, 0.0), DriverKind::fbm};
    const auto y = build_ito_process(drift, g, b);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(y[i] == doctest::Approx(0.5 + g.time(i)));

    const TimeGrid big(1.0, 64);
    const ItoProcessSpec both{0.0, StepFunction::constant(big, 1.0), StepFunction::constant(big, 2.0), DriverKind::fbm};
    const auto gen = make_generator(big, kH);
    std::vector<double> end(20000);
    for (std::size_t p = 0; p < end.size(); ++p) end[p] = build_ito_process(both, big, gen->sample(8, p).values).back();
    const auto v = testing_support::variance_se(end);
    CHECK(within_se(v.mean, 4.0, v.se));
}
