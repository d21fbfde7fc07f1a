#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "fracito/harness.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<std::size_t> parse_grid(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
            throw std::invalid_argument("--grid expects comma-separated positive integers, got '" + text + "'");
        }
        out.push_back(std::stoull(item));
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fracito: functional Ito calculus for fractional Brownian motion, verified by Monte Carlo"};
    app.set_version_flag("--version", fracito::version());

    std::string experiment, grid, config_path, functional, driver, out, format;
    double hurst = 0.0, horizon = 1.0, beta = 0.0, ridge = 0.0;
    std::size_t paths = 0, workers = 0, iterations = 0;
    std::uint64_t seed = 1;
    bool list = false, quiet = false;

    app.add_option("--experiment", experiment, "experiment id (see --list)");
    app.add_option("--hurst", hurst, "Hurst parameter in [0.5, 1)");
    app.add_option("--horizon", horizon, "time horizon T");
    app.add_option("--grid", grid, "resolution ladder n[,2n,...]");
    app.add_option("--paths", paths, "Monte Carlo paths M");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--functional", functional, "functional id");
    app.add_option("--driver", driver, "BSDE driver: zero, constant:<c>, linear:<a>");
    app.add_option("--iterations", iterations, "Picard iterations");
    app.add_option("--beta", beta, "beta of the Picard norm");
    app.add_option("--ridge", ridge, "ridge penalty of the Picard regression");
    app.add_option("--workers", workers, "worker threads (0 = hardware)");
    app.add_option("--out", out, std::string("output file; default $") + fracito::kOutDirEnv + "/<experiment>.<format>");
    app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--config", config_path, "JSON config file; flags override its fields");
    app.add_flag("--list", list, "list experiments and functionals");
    app.add_flag("--quiet", quiet, "no summary table on stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (list) {
            for (const auto& e : fracito::list_experiments()) {
                std::cout << e.id << "\t" << e.anchor << "\n";
            }
            std::cout << "\nfunctionals:";
            for (const auto& f : fracito::functional_ids()) std::cout << ' ' << f;
            std::cout << '\n';
            return 0;
        }

        fracito::ExperimentConfig cfg;
        if (!config_path.empty()) cfg = fracito::config_from_json(read_file(config_path));
        if (app.count("--experiment")) cfg.experiment = experiment;
        if (cfg.experiment.empty()) throw std::invalid_argument("missing --experiment (or 'experiment' in --config)");
        if (app.count("--hurst")) cfg.hurst = hurst;
        if (app.count("--horizon")) cfg.horizon = horizon;
        if (app.count("--grid")) cfg.grid = parse_grid(grid);
        if (app.count("--paths")) cfg.paths = paths;
        if (app.count("--seed")) cfg.seed = seed;
        if (app.count("--functional")) cfg.functional = functional;
        if (app.count("--driver")) cfg.driver = driver;
        if (app.count("--iterations")) cfg.iterations = iterations;
        if (app.count("--beta")) cfg.beta = beta;
        if (app.count("--ridge")) cfg.ridge = ridge;
        if (app.count("--workers")) cfg.workers = workers;
        if (app.count("--out")) cfg.out = out;
        if (app.count("--format")) cfg.format = format;

        const auto report = fracito::run(cfg);
        const std::string& fmt = report.config.format;
        const std::string body = fmt == "csv" ? fracito::to_csv(report) : fracito::to_json(report) + "\n";

        std::string target = report.config.out;
        if (target.empty()) {
            if (const char* dir = std::getenv(fracito::kOutDirEnv); dir && *dir) {
                target = (fs::path(dir) / (report.config.experiment + "." + fmt)).string();
            }
        }
        if (target.empty()) {
            std::cout << body;
        } else {
            const fs::path p(target);
            if (p.has_parent_path()) fs::create_directories(p.parent_path());
            std::ofstream f(p);
            if (!f) throw std::runtime_error("cannot write " + target);
            f << body;
        }
        if (!quiet) {
            std::cerr << report.config.experiment << "  (" << fracito::catalog_entry(report.config.experiment).anchor
                      << ")\n"
                      << fracito::summarize(report);
            for (const auto& note : report.notes) std::cerr << "note: " << note << '\n';
            if (!target.empty()) std::cerr << "wrote " << target << '\n';
        }
        if (report.error) {
            std::cerr << "error (" << report.error->kind << "): " << report.error->message << '\n';
            return 1;
        }
        return report.has_failure() ? 2 : 0;
    } catch (const std::exception& e) {
        std::cerr << "fracito: " << e.what() << '\n';
        return 1;
    }
}
