// Python bindings over the main operations: sampling, passage times, trees,
// and the Monte Carlo estimators.  Thin wrappers; the C++ CLI remains the
// primary driver.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "efpp/estimators.hpp"
#include "efpp/forest.hpp"
#include "efpp/harness.hpp"

namespace py = pybind11;
using namespace efpp;

namespace {

PointSet make_pointset(int d, const std::vector<double>& lower, const std::vector<double>& upper,
                       double lam, std::uint64_t seed) {
    if (static_cast<int>(lower.size()) != d || static_cast<int>(upper.size()) != d)
        throw std::invalid_argument("lower/upper must have d entries");
    return PointSet::sample_poisson(Window(lower, upper), lam, seed);
}

py::dict path_dict(const PathResult& p, int d) {
    py::dict out;
    out["ids"] = p.vertex_ids;
    out["coords"] = p.coords;
    out["link_lengths"] = p.link_lengths;
    out["cost"] = p.total_cost;
    out["trusted"] = p.trusted;
    out["margin"] = p.margin;
    out["dim"] = d;
    return out;
}

py::dict estimate_dict(const ScalingEstimate& est) {
    py::dict out;
    out["lengths"] = est.lengths;
    out["mean"] = est.mean;
    out["var"] = est.var;
    out["se"] = est.se;
    out["slope"] = est.fit.slope;
    out["ci_lo"] = est.fit.ci_lo;
    out["ci_hi"] = est.fit.ci_hi;
    out["mu_hat"] = est.mu_hat;
    out["mu_hat_se"] = est.mu_hat_se;
    out["monotone_ok"] = est.monotone_ok;
    out["pass"] = est.pass;
    return out;
}

} // namespace

PYBIND11_MODULE(_efpp, m) {
    m.doc() = "Euclidean first-passage percolation toolkit";

    py::class_<Window>(m, "Window")
        .def(py::init<std::vector<double>, std::vector<double>>())
        .def_static("centered_cube", &Window::centered_cube)
        .def_property_readonly("dim", &Window::dim)
        .def("volume", &Window::volume);

    py::class_<PointSet>(m, "PointSet")
        .def_static("sample", &make_pointset, py::arg("d"), py::arg("lower"), py::arg("upper"),
                    py::arg("lam"), py::arg("seed"))
        .def_static(
            "from_points",
            [](const Window& w, const std::vector<double>& coords, double lam) {
                return PointSet::from_points(w, coords, lam);
            },
            py::arg("window"), py::arg("coords"), py::arg("lam"))
        .def_property_readonly("n", &PointSet::size)
        .def_property_readonly("dim", &PointSet::dim)
        .def_property_readonly("coords", [](const PointSet& ps) { return ps.coords(); })
        .def("nearest",
             [](const PointSet& ps, const std::vector<double>& x) { return ps.nearest(Vec(x)); })
        .def("range_query", [](const PointSet& ps, const std::vector<double>& x, double r) {
            return ps.range_query(Vec(x), r);
        });

    py::class_<CostModel>(m, "CostModel")
        .def_static("power", &CostModel::power)
        .def_static("truncated", &CostModel::truncated)
        .def_readonly("alpha", &CostModel::alpha)
        .def_readonly("h", &CostModel::h)
        .def("link_cost", &CostModel::link_cost);

    m.def(
        "passage_time",
        [](const PointSet& ps, double alpha, const std::vector<double>& x,
           const std::vector<double>& y, const std::string& mode, int k) {
            const auto res = passage_time(ps, CostModel::power(alpha), Vec(x), Vec(y),
                                          mode == "exact" ? EndpointMode::ExactEndpoints
                                                          : EndpointMode::ParticleEndpoints,
                                          k);
            return py::make_tuple(res.cost, path_dict(res.path, ps.dim()));
        },
        py::arg("ps"), py::arg("alpha"), py::arg("x"), py::arg("y"), py::arg("mode") = "particle",
        py::arg("k") = 32);

    m.def(
        "windowed_passage_time",
        [](int d, double alpha, double lam, const std::vector<double>& x,
           const std::vector<double>& y, std::uint64_t seed, const std::string& mode) {
            const auto res =
                windowed_passage_time(d, CostModel::power(alpha), lam, Vec(x), Vec(y), seed,
                                      mode == "exact" ? EndpointMode::ExactEndpoints
                                                      : EndpointMode::ParticleEndpoints);
            py::dict out = path_dict(res.path, d);
            out["regrowths"] = res.regrowths;
            out["points"] = res.point_count;
            return out;
        },
        py::arg("d"), py::arg("alpha"), py::arg("lam"), py::arg("x"), py::arg("y"), py::arg("seed"),
        py::arg("mode") = "particle");

    m.def(
        "brute_force_geodesic",
        [](const PointSet& ps, double alpha, int a, int b) {
            return path_dict(brute_force_geodesic(ps, CostModel::power(alpha), a, b), ps.dim());
        },
        py::arg("ps"), py::arg("alpha"), py::arg("a"), py::arg("b"));

    m.def(
        "euclidean_mst",
        [](const PointSet& ps) {
            const GeodesicTree t = euclidean_mst(ps);
            py::dict out;
            out["root"] = t.root;
            out["parents"] = t.parent;
            out["cost_to_root"] = t.cost_to_root;
            return out;
        },
        py::arg("ps"));

    m.def(
        "minimax_distance",
        [](const PointSet& ps, int a, int b) {
            const auto [value, path] = minimax_distance(ps, a, b);
            return py::make_tuple(value, path.vertex_ids);
        },
        py::arg("ps"), py::arg("a"), py::arg("b"));

    m.def(
        "estimate_mu",
        [](int d, double alpha, double lam, const std::vector<double>& lengths, int replicates,
           std::uint64_t seed, int workers) {
            EstimatorOptions opt;
            opt.workers = workers;
            return estimate_dict(estimate_mu(d, alpha, lam, lengths, replicates, seed, opt));
        },
        py::arg("d"), py::arg("alpha"), py::arg("lam"), py::arg("lengths"), py::arg("replicates"),
        py::arg("seed"), py::arg("workers") = 0);

    m.def(
        "variance_scaling",
        [](int d, double alpha, double lam, const std::vector<double>& lengths, int replicates,
           std::uint64_t seed, int workers) {
            EstimatorOptions opt;
            opt.workers = workers;
            return estimate_dict(variance_scaling(d, alpha, lam, lengths, replicates, seed, opt));
        },
        py::arg("d"), py::arg("alpha"), py::arg("lam"), py::arg("lengths"), py::arg("replicates"),
        py::arg("seed"), py::arg("workers") = 0);

    m.def(
        "wandering_scaling",
        [](int d, double alpha, double lam, const std::vector<double>& lengths, int replicates,
           std::uint64_t seed, int workers) {
            EstimatorOptions opt;
            opt.workers = workers;
            return estimate_dict(wandering_scaling(d, alpha, lam, lengths, replicates, seed, opt));
        },
        py::arg("d"), py::arg("alpha"), py::arg("lam"), py::arg("lengths"), py::arg("replicates"),
        py::arg("seed"), py::arg("workers") = 0);

    m.def(
        "run_experiment",
        [](const std::string& spec_json) {
            const ExperimentSpec spec = ExperimentSpec::from_json(json::parse(spec_json));
            const ExperimentResult res = run_experiment(spec);
            std::ostringstream records;
            write_records(records, spec, res);
            py::dict out;
            out["records"] = records.str();
            out["summary"] = res.summary.dump();
            out["passed"] = res.passed;
            return out;
        },
        py::arg("spec_json"));

    m.attr("__version__") = "0.1.0";
}
