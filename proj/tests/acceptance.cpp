// Acceptance suite: one PASS/FAIL line per criterion. Exit status is 0 only
// when every criterion passes.
#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fracito/harness.hpp"

using namespace fracito;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

ExperimentConfig make(const std::string& id, std::optional<double> h, std::vector<std::size_t> grid,
                      std::optional<std::size_t> paths, std::string functional = "") {
    ExperimentConfig c;
    c.experiment = id;
    c.hurst = h;
    c.grid = std::move(grid);
    c.paths = paths;
    c.seed = 20240601;
    c.functional = std::move(functional);
    return c;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// Runs the experiment and folds every verdict row into `out`; the listed
// statistics are quoted in the detail text.
ExperimentReport check(Outcome& out, const ExperimentConfig& c, std::vector<std::string> quote = {}) {
    const auto r = run(c);
    std::ostringstream d;
    d << c.experiment;
    if (r.config.hurst) d << " H=" << *r.config.hurst;
    if (r.error) {
        out.pass = false;
        d << " error: " << r.error->message;
    }
    for (const auto& row : r.rows) {
        if (row.verdict == Verdict::fail) {
            out.pass = false;
            d << " [" << row.statistic << "@" << row.n << "=" << fmt(row.value) << " FAIL]";
        } else {
            for (const auto& q : quote) {
                if (row.statistic == q) d << " " << q << "@" << row.n << "=" << fmt(row.value);
            }
        }
    }
    if (!out.detail.empty()) out.detail += ";";
    out.detail += " " + d.str();
    return r;
}

Outcome crit_covariance() {
    Outcome o;
    const std::vector<std::string> pairs = {"cov(0.5,1)", "cov(0.4,0.9)"};
    for (double h : {0.6, 0.75}) check(o, make("covariance_check", h, {256}, 20000), pairs);
    check(o, make("covariance_check", 0.7, {250}, 20000), pairs);
    return o;
}

Outcome crit_quadratic_variation() {
    Outcome o;
    check(o, make("quadratic_variation", 0.7, {512, 1024}, 10000), {"mean_qv", "qv_ratio"});
    return o;
}

Outcome crit_kernel_geometry() {
    Outcome o;
    check(o, make("kernel_geometry", 0.7, {64}, std::nullopt), {"max_relative_error"});
    return o;
}

Outcome crit_wis_mean() {
    Outcome o;
    for (double h : {0.6, 0.75}) check(o, make("wis_mean", h, {1024}, 10000), {"wis_mean"});
    return o;
}

Outcome crit_wis_closed_form() {
    Outcome o;
    check(o, make("wis_closed_form", 0.7, {512, 1024, 2048, 4096}, 1000), {"rms_gap"});
    return o;
}

Outcome crit_theorem32() {
    Outcome o;
    check(o, make("theorem32", 0.7, {256, 512, 1024, 2048}, 1000, "product_integral"), {"rms_residual"});
    return o;
}

Outcome crit_prop54() {
    Outcome o;
    for (double h : {0.6, 0.75}) {
        check(o, make("prop54", h, {256, 512, 1024}, 10000, "identity"), {"stratonovich_mean_vs_correction"});
    }
    return o;
}

Outcome crit_brownian() {
    Outcome o;
    check(o, make("prop43", 0.5, {256, 512, 1024, 2048}, 1000, "identity"), {"gap_vs_correction"});
    check(o, make("theorem20", 0.5, {256, 512, 1024, 2048}, 1000), {"rms_residual"});
    return o;
}

Outcome crit_prop45() {
    Outcome o;
    check(o, make("prop45", 0.7, {512, 1024, 2048}, 1000, "identity"), {"rms_residual"});
    return o;
}

Outcome crit_kernel_variance() {
    Outcome o;
    check(o, make("kernel_variance", 0.7, {1024}, std::nullopt), {"kernel_quadrature"});
    return o;
}

Outcome crit_bsde() {
    Outcome o;
    check(o, make("bsde_residual", 0.7, {2048}, 1000, "identity"), {"rms_residual"});
    check(o, make("bsde_residual", 0.7, {2048}, 1000, "square"), {"rms_residual"});
    check(o, make("z_relation", 0.7, {512}, 100, "identity"), {"z_relation"});
    check(o, make("z_relation", 0.7, {512}, 100, "square"), {"z_relation"});
    return o;
}

Outcome crit_picard() {
    Outcome o;
    auto c = make("picard", 0.7, {512}, 10000, "square");
    c.iterations = 8;
    check(o, c, {"y0"});
    c.driver = "linear:-1";
    check(o, c, {"y0", "beta_distance_8"});
    return o;
}

Outcome crit_determinism() {
    Outcome o;
    std::vector<ExperimentConfig> cases = {make("covariance_check", 0.7, {250}, 2000),
                                           make("prop54", 0.7, {128, 256}, 1000, "identity"),
                                           make("bsde_residual", 0.7, {256}, 200, "square")};
    auto p = make("picard", 0.7, {64}, 1000, "square");
    p.iterations = 3;
    cases.push_back(p);
    for (auto c : cases) {
        c.workers = 1;
        const auto a = statistics_fingerprint(run(c));
        c.workers = 4;
        const auto b = statistics_fingerprint(run(c));
        const auto again = statistics_fingerprint(run(c));
        const bool same = a == b && b == again;
        o.pass = o.pass && same;
        o.detail += " " + c.experiment + (same ? " identical" : " DIFFERS");
    }
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"covariance law", crit_covariance},
        {"vanishing quadratic variation", crit_quadratic_variation},
        {"kernel geometry", crit_kernel_geometry},
        {"zero mean of the WIS integral", crit_wis_mean},
        {"WIS closed form for gamma", crit_wis_closed_form},
        {"fBm functional Ito formula residual", crit_theorem32},
        {"Stratonovich mean and WIS correction", crit_prop54},
        {"Brownian benchmarks", crit_brownian},
        {"midpoint vs left point gap", crit_prop45},
        {"kernel/variance identity", crit_kernel_variance},
        {"BSDE closed forms", crit_bsde},
        {"Picard solver", crit_picard},
        {"determinism across workers", crit_determinism},
    };
    std::size_t passed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string(" exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        passed += o.pass;
        std::printf("criterion %2zu %s: %s (%.1fs)%s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    secs, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("acceptance: %zu/%zu criteria evaluated, %zu passed\n", criteria.size(), criteria.size(), passed);
    return passed == criteria.size() ? 0 : 2;
}
