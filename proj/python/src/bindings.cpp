#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lfopt/async_sim.hpp"
#include "lfopt/dataset.hpp"
#include "lfopt/harness.hpp"
#include "lfopt/models.hpp"
#include "lfopt/optimizers.hpp"
#include "lfopt/theory.hpp"

namespace py = pybind11;
using namespace lfopt;

namespace {

py::array_t<double> to_numpy(const DenseVector& v) {
  return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

DenseVector from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1-d array");
  return DenseVector(std::vector<double>(a.data(), a.data() + a.size()));
}

py::dict metrics_dict(const RunMetrics& m) {
  std::vector<double> elapsed, wall, loss, gsq;
  std::vector<std::uint64_t> evals;
  for (const auto& r : m.rows) {
    elapsed.push_back(r.elapsed_units);
    wall.push_back(r.wall_seconds);
    evals.push_back(r.grad_evals);
    loss.push_back(r.train_loss);
    gsq.push_back(r.grad_norm_sq);
  }
  py::dict d;
  d["elapsed_units"] = elapsed;
  d["wall_seconds"] = wall;
  d["grad_evals"] = evals;
  d["train_loss"] = loss;
  d["grad_norm_sq"] = gsq;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Lock-free asynchronous SGD and SVRG";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<NonFiniteError>(m, "NonFiniteError", PyExc_ArithmeticError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);
  py::register_exception<theory::InfeasibleError>(m, "InfeasibleError", PyExc_ValueError);

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("size", &Dataset::size)
      .def_readonly("dim", &Dataset::dim)
      .def_readonly("num_classes", &Dataset::num_classes)
      .def_readonly("labels", &Dataset::labels)
      .def_readonly("class_names", &Dataset::class_names)
      .def("__len__", &Dataset::size);

  m.def("load_libsvm", [](const std::string& path, bool binary_relabel) {
    return load_libsvm(path, ParseOptions{binary_relabel});
  }, py::arg("path"), py::arg("binary_relabel") = false);
  m.def("parse_libsvm", [](const std::string& text, bool binary_relabel) {
    return parse_libsvm(std::string_view(text), ParseOptions{binary_relabel});
  }, py::arg("text"), py::arg("binary_relabel") = false);
  m.def("serialize_libsvm", &serialize_libsvm);
  m.def("scale_max_abs", [](Dataset data) {
    scale_max_abs(data);
    return data;
  }, "Returns a copy with every feature divided by its largest absolute value.");
  m.def("head", &head);
  m.def("binarize", &binarize, py::arg("data"), py::arg("positive"));
  m.def("make_synthetic_logreg", &make_synthetic_logreg, py::arg("n"), py::arg("d"), py::arg("seed"),
        py::arg("flip_prob") = 0.1);
  m.def("make_synthetic_multiclass", &make_synthetic_multiclass, py::arg("n"), py::arg("d"), py::arg("k"),
        py::arg("seed"));

  py::class_<ModelSpec>(m, "ModelSpec")
      .def_static("logreg", &ModelSpec::logreg, py::arg("d"), py::arg("lam"))
      .def_static("svm", &ModelSpec::svm, py::arg("d"), py::arg("lam"))
      .def_static("mlp", &ModelSpec::mlp, py::arg("d"), py::arg("k"), py::arg("hidden"), py::arg("lam"))
      .def_property_readonly("kind", [](const ModelSpec& s) { return std::string(to_string(s.kind)); })
      .def_readonly("lam", &ModelSpec::lambda)
      .def_readonly("input_dim", &ModelSpec::input_dim)
      .def_readonly("num_classes", &ModelSpec::num_classes)
      .def_readonly("hidden_width", &ModelSpec::hidden_width)
      .def_property_readonly("param_dim", [](const ModelSpec& s) { return make_layout(s).total_dim; });

  m.def("init_params", [](const ModelSpec& spec, std::uint64_t seed) { return to_numpy(init_params(spec, seed)); });
  m.def("full_loss_and_grad", [](const ModelSpec& spec, py::array_t<double> params, const Dataset& data) {
    const auto r = full_loss_and_grad(spec, from_numpy(params), data);
    return py::make_tuple(r.loss, to_numpy(r.grad));
  });
  m.def("lipschitz_bound", &lipschitz_bound);

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init([](const std::string& algo, double eta, std::size_t threads, std::size_t epochs,
                       std::size_t outer_iters, std::uint64_t seed, std::size_t eval_every) {
             RunConfig c;
             c.algo = parse_algorithm(algo);
             c.eta = eta;
             c.threads = threads;
             c.epochs = epochs;
             c.outer_iters = outer_iters;
             c.seed = seed;
             c.eval_every = eval_every;
             return c;
           }),
           py::arg("algo") = "sgd", py::arg("eta") = 0.01, py::arg("threads") = 1, py::arg("epochs") = 1,
           py::arg("outer_iters") = 1, py::arg("seed") = 0, py::arg("eval_every") = 1)
      .def_property("algo", [](const RunConfig& c) { return std::string(to_string(c.algo)); },
                    [](RunConfig& c, const std::string& a) { c.algo = parse_algorithm(a); })
      .def_readwrite("eta", &RunConfig::eta)
      .def_readwrite("threads", &RunConfig::threads)
      .def_readwrite("epochs", &RunConfig::epochs)
      .def_readwrite("iters_per_epoch", &RunConfig::iters_per_epoch)
      .def_readwrite("outer_iters", &RunConfig::outer_iters)
      .def_readwrite("inner_iters", &RunConfig::inner_iters)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("eval_every", &RunConfig::eval_every)
      .def_readwrite("time_unit_seconds", &RunConfig::time_unit_seconds)
      .def("set_init", [](RunConfig& c, py::array_t<double> init) { c.init = from_numpy(init); });

  m.def("run", [](const ModelSpec& spec, const Dataset& data, const RunConfig& config) {
    RunResult r;
    {
      py::gil_scoped_release release;
      r = run(spec, data, config);
    }
    return py::make_tuple(metrics_dict(r.metrics), to_numpy(r.params));
  }, "Returns (metrics dict of column lists, final parameters).");

  m.def("variance_probe", [](const ModelSpec& spec, const Dataset& data, py::array_t<double> anchor,
                             py::array_t<double> query, std::size_t samples, std::uint64_t seed) {
    const auto p = variance_probe(spec, data, from_numpy(anchor), from_numpy(query), samples, seed);
    py::dict d;
    d["mean_sq_svrg"] = p.mean_sq_svrg;
    d["mean_sq_sgd"] = p.mean_sq_sgd;
    d["se_svrg"] = p.se_svrg;
    d["se_sgd"] = p.se_sgd;
    return d;
  });

  m.def("solve_rho", &theory::solve_rho, py::arg("eta"), py::arg("tau"), py::arg("L"));
  m.def("theory_report", [](double L, double alpha, std::size_t tau, double eta, std::optional<double> f0, double V,
                            std::size_t total_iters, std::optional<double> beta, std::optional<std::size_t> M_tilde,
                            std::optional<std::size_t> n, std::optional<double> mu, std::optional<double> v) {
    harness::TheoryQuery q{L, alpha, tau, eta, f0, V, total_iters, beta, M_tilde, n, mu, v};
    return harness::theory_report(q);
  }, py::arg("L") = 1.0, py::arg("alpha") = 1.0, py::arg("tau") = 0, py::arg("eta") = 0.01,
     py::arg("f0") = py::none(), py::arg("V") = 1.0, py::arg("total_iters") = 0, py::arg("beta") = py::none(),
     py::arg("M_tilde") = py::none(), py::arg("n") = py::none(), py::arg("mu") = py::none(),
     py::arg("v") = py::none(), "key=value lines, as printed by `lfopt theory`.");

  m.def("simulate", [](const ModelSpec& spec, const Dataset& data, const std::string& algo, std::size_t tau,
                       double keep_prob, double partial_prob, double eta, std::size_t steps, std::size_t outer_iters,
                       std::size_t inner_iters, std::size_t trials, std::uint64_t seed) {
    sim::SimConfig c;
    c.algo = sim::parse_sim_algo(algo);
    c.tau = tau;
    c.keep_prob = keep_prob;
    c.partial_prob = partial_prob;
    c.eta = eta;
    c.steps = steps;
    c.outer_iters = outer_iters;
    c.inner_iters = inner_iters;
    c.trials = trials;
    c.seed = seed;
    c.record_detail = false;
    harness::SimReport report;
    {
      py::gil_scoped_release release;
      report = harness::simulate_and_check(spec, data, c);
    }
    std::vector<double> q_hat, q_w, gap_sq;
    for (const auto& s : report.trace.steps) {
      q_hat.push_back(s.q_hat);
      q_w.push_back(s.q_w);
      gap_sq.push_back(s.gap_sq);
    }
    py::dict d;
    d["q_hat"] = q_hat;
    d["q_w"] = q_w;
    d["gap_sq"] = gap_sq;
    d["rho"] = report.rho;
    d["summary"] = harness::sim_summary(report);
    return d;
  }, py::arg("spec"), py::arg("data"), py::arg("algo") = "hogwild", py::arg("tau") = 0, py::arg("keep_prob") = 1.0,
     py::arg("partial_prob") = 0.5, py::arg("eta") = 0.01, py::arg("steps") = 50, py::arg("outer_iters") = 1,
     py::arg("inner_iters") = 50, py::arg("trials") = 100, py::arg("seed") = 0);

  m.attr("METRICS_HEADER") = std::string(harness::kMetricsHeader);
  m.def("read_metrics_file", [](const std::string& path) {
    const auto table = harness::read_metrics_file(path);
    py::list rows;
    for (const auto& r : table.records) {
      rows.append(py::make_tuple(r.algo, r.threads, r.seed, r.eta, r.row, r.values.elapsed_units,
                                 r.values.wall_seconds, r.values.grad_evals, r.values.train_loss,
                                 r.values.grad_norm_sq));
    }
    return py::make_tuple(table.cmdline, rows);
  }, "Returns (cmdline, list of row tuples in header order). Raises on schema mismatch.");
  py::register_exception<harness::SchemaError>(m, "SchemaError", PyExc_ValueError);
}
