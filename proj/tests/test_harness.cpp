#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fracito/harness.hpp"
#include "json.hpp"

using namespace fracito;
using nlohmann::json;

namespace {

ExperimentConfig small(const std::string& id) {
    ExperimentConfig c;
    c.experiment = id;
    c.grid = {64};
    c.paths = 200;
    c.seed = 7;
    c.workers = 1;
    return c;
}

json load(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return json::parse(in);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Every key the schema requires is present and nothing else is.
void check_keys(const json& schema, const json& value) {
    REQUIRE(value.is_object());
    std::set<std::string> required(schema.at("required").begin(), schema.at("required").end());
    std::set<std::string> present;
    for (const auto& [k, _] : value.items()) present.insert(k);
    CHECK(required == present);
}

int run_cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " \"" FRACITO_CLI_PATH "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("catalog lists every experiment once") {
    const char* ids[] = {"covariance_check", "quadratic_variation", "kernel_geometry", "wis_mean",
                         "wis_closed_form", "theorem20", "bm_stratonovich", "prop43", "prop45", "theorem32",
                         "prop54", "theorem50", "kernel_variance", "wis_variance", "bsde_residual", "picard",
                         "z_relation"};
    const auto cat = list_experiments();
    std::set<std::string> seen;
    for (const auto& e : cat) {
        CHECK(seen.insert(e.id).second);
        CHECK_FALSE(e.anchor.empty());
        CHECK_FALSE(e.description.empty());
    }
    for (const char* id : ids) CHECK(seen.count(id) == 1);
    CHECK_THROWS_AS(catalog_entry("theorem99"), std::invalid_argument);
}

TEST_CASE("functional ids resolve") {
    for (const auto& id : functional_ids()) CHECK(make_functional(id) != nullptr);
    CHECK_THROWS_AS(make_functional("sine"), std::invalid_argument);
}

TEST_CASE("config errors name the field") {
    try {
        config_from_json(R"({"hurst": 0.7})");
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("experiment") != std::string::npos);
    }
    try {
        config_from_json(R"({"experiment": "prop54", "hurts": 0.7})");
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("hurts") != std::string::npos);
    }
    CHECK_THROWS_AS(config_from_json("{not json"), std::invalid_argument);
}

TEST_CASE("config round trip") {
    auto c = small("picard");
    c.hurst = 0.65;
    c.driver = "linear:-1";
    c.beta = 2.0;
    const auto back = config_from_json(config_to_json(c));
    CHECK(back.experiment == c.experiment);
    CHECK(*back.hurst == 0.65);
    CHECK(back.grid == c.grid);
    CHECK(*back.paths == 200);
    CHECK(back.driver == "linear:-1");
    CHECK(*back.beta == 2.0);
    CHECK_FALSE(back.iterations.has_value());
}

TEST_CASE("invalid configs are rejected before any work") {
    auto c = small("theorem20");
    c.hurst = 0.7;  // Brownian-only formula
    CHECK_THROWS_AS(run(c), std::invalid_argument);
    c = small("covariance_check");
    c.paths = 10;
    CHECK_THROWS_AS(run(c), std::invalid_argument);
    c = small("nope");
    CHECK_THROWS_AS(run(c), std::invalid_argument);
    c = small("theorem32");
    c.grid = {64, 48};
    CHECK_THROWS_AS(run(c), std::invalid_argument);
}

TEST_CASE("same seed, same statistics, any worker count") {
    auto c = small("covariance_check");
    c.grid = {250};
    const auto a = run(c);
    const auto b = run(c);
    c.workers = 3;
    const auto d = run(c);
    CHECK(statistics_fingerprint(a) == statistics_fingerprint(b));
    CHECK(statistics_fingerprint(a) == statistics_fingerprint(d));
    c.seed = 8;
    CHECK(statistics_fingerprint(a) != statistics_fingerprint(run(c)));
}

TEST_CASE("formula experiment rows carry verdicts") {
    auto c = small("theorem50");
    c.grid = {64, 128};
    const auto r = run(c);
    CHECK_FALSE(r.error.has_value());
    REQUIRE_FALSE(r.rows.empty());
    bool any_verdict = false;
    for (const auto& row : r.rows) {
        CHECK(row.experiment == "theorem50");
        CHECK(row.H == 0.7);
        if (row.verdict != Verdict::info) {
            any_verdict = true;
            CHECK(std::isfinite(row.threshold));
        }
    }
    CHECK(any_verdict);
}

TEST_CASE("json round trip is lossless") {
    auto c = small("wis_mean");
    const auto r = run(c);
    const auto text = to_json(r);
    const auto back = report_from_json(text);
    CHECK(to_json(back) == text);
    CHECK(statistics_fingerprint(back) == statistics_fingerprint(r));
}

TEST_CASE("csv has the fixed header and one line per row") {
    const auto r = run(small("kernel_geometry"));
    const auto csv = to_csv(r);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "experiment,n,M,H,statistic,value,se,threshold,verdict");
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        CHECK(std::count(line.begin(), line.end(), ',') == 8);
    }
    CHECK(lines == r.rows.size());
}

TEST_CASE("summaries of empty reports are header only") {
    ExperimentReport r;
    r.config.experiment = "prop54";
    const auto s = summarize(r);
    CHECK(s.find("statistic") != std::string::npos);
    CHECK(std::count(s.begin(), s.end(), '\n') == 2);
    CHECK(to_csv(r) == "experiment,n,M,H,statistic,value,se,threshold,verdict\n");
}

TEST_CASE("reports match the schema layout") {
    const auto schema = load(FRACITO_SCHEMA_PATH);
    auto c = small("prop54");
    const auto report = json::parse(to_json(run(c)));
    check_keys(schema, report);
    check_keys(schema.at("properties").at("config"), report.at("config"));
    const auto& row_schema = schema.at("properties").at("rows").at("items");
    std::set<std::string> verdicts(row_schema.at("properties").at("verdict").at("enum").begin(),
                                   row_schema.at("properties").at("verdict").at("enum").end());
    for (const auto& row : report.at("rows")) {
        check_keys(row_schema, row);
        CHECK(verdicts.count(row.at("verdict").get<std::string>()) == 1);
        CHECK((row.at("se").is_null() || row.at("se").is_number()));
    }
}

TEST_CASE("cli exit codes and output directory") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "fracito_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string env = "FRACITO_OUT_DIR=\"" + dir.string() + "\"";

    CHECK(run_cli("--version") == 0);
    CHECK(run_cli("--list") == 0);
    CHECK(run_cli("--experiment covariance_check --grid 250 --paths 200 --seed 3", env) == 0);
    CHECK(fs::exists(dir / "covariance_check.json"));
    const auto j = json::parse(slurp(dir / "covariance_check.json"));
    CHECK(j.at("experiment") == "covariance_check");
    CHECK(j.at("passed") == true);

    CHECK(run_cli("--experiment kernel_geometry --format csv", env) == 0);
    CHECK(slurp(dir / "kernel_geometry.csv").rfind("experiment,n,M,H,statistic,value,se,threshold,verdict\n", 0) == 0);

    const auto explicit_out = dir / "x.json";
    CHECK(run_cli("--experiment kernel_geometry --out \"" + explicit_out.string() + "\"") == 0);
    CHECK(fs::exists(explicit_out));

    // the kernel/variance identity does not hold numerically
    CHECK(run_cli("--experiment kernel_variance --grid 128", env) == 2);
    CHECK(run_cli("--experiment no_such_thing", env) == 1);
    CHECK(run_cli("--experiment theorem20 --hurst 0.7", env) == 1);
    CHECK(run_cli("--experiment prop54 --grid abc", env) == 1);
    fs::remove_all(dir);
}
