#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fracito/fbm.hpp"
#include "fracito/harness.hpp"
#include "fracito/integrators.hpp"
#include "fracito/malliavin.hpp"

namespace py = pybind11;
using namespace fracito;

namespace {

py::array_t<double> sample_paths(std::size_t steps, std::size_t paths, double hurst, double horizon,
                                 std::uint64_t seed, std::size_t workers) {
    const TimeGrid grid(horizon, steps);
    const auto b = [&] {
        py::gil_scoped_release release;
        return generate_bundle(*make_generator(grid, HurstParameter(hurst)), paths, seed, workers);
    }();
    py::array_t<double> out({paths, grid.points()});
    std::copy(b.values.begin(), b.values.end(), out.mutable_data());
    return out;
}

double wis(const std::string& functional, py::array_t<double, py::array::c_style | py::array::forcecast> path,
           double hurst, double horizon) {
    if (path.ndim() != 1 || path.shape(0) < 2) throw std::invalid_argument("wis_sum: need a 1-d path of length >= 2");
    const auto n = static_cast<std::size_t>(path.shape(0));
    const TimeGrid grid(horizon, n - 1);
    return wis_sum(*make_functional(functional), grid, std::span<const double>(path.data(), n), HurstParameter(hurst))
        .value;
}

py::list catalog() {
    py::list out;
    for (const auto& e : list_experiments()) {
        py::dict d;
        d["id"] = e.id;
        d["anchor"] = e.anchor;
        d["description"] = e.description;
        d["statistical"] = e.statistical;
        d["default_functional"] = e.default_functional;
        out.append(d);
    }
    return out;
}

std::string run_json(const std::string& config) {
    const auto c = config_from_json(config);
    const auto r = [&] {
        py::gil_scoped_release release;
        return run(c);
    }();
    return to_json(r);
}

}  // namespace

PYBIND11_MODULE(_fracito, m) {
    m.doc() = "fBm functional Ito calculus: sampling, kernels, integrals and the experiment harness.";
    m.attr("__version__") = version();

    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("covariance", [](double s, double t, double h) { return covariance(s, t, HurstParameter(h)); },
          py::arg("s"), py::arg("t"), py::arg("hurst"));
    m.def("indicator_inner_product",
          [](double a, double b, double c, double d, double h) {
              return indicator_inner_product(a, b, c, d, HurstParameter(h));
          },
          py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"), py::arg("hurst"));
    m.def("sample_paths", &sample_paths, py::arg("steps"), py::arg("paths"), py::arg("hurst"),
          py::arg("horizon") = 1.0, py::arg("seed") = 1, py::arg("workers") = 0,
          "fBm paths as an array of shape (paths, steps + 1).");
    m.def("wis_sum", &wis, py::arg("functional"), py::arg("path"), py::arg("hurst"), py::arg("horizon") = 1.0);
    m.def("functional_ids", &functional_ids);
    m.def("list_experiments", &catalog);
    m.def("run_json", &run_json, py::arg("config"), "Runs an experiment from a JSON config; returns the JSON report.");
    m.def("to_csv", [](const std::string& report) { return to_csv(report_from_json(report)); }, py::arg("report"));
}
