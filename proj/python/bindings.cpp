#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ligp/bench.hpp"
#include "ligp/criteria.hpp"
#include "ligp/validation.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

using ligp::Matrix;
using ligp::Vector;

ligp::Domain make_domain(const Matrix& points, const std::optional<Vector>& lower, const std::optional<Vector>& upper) {
  if (lower.has_value() != upper.has_value()) throw ligp::InvalidArgument("give both lower and upper or neither");
  if (lower) return ligp::Domain(*lower, *upper);
  return ligp::Domain::bounding_box(points);
}

Vector apply_rows(const Matrix& x, double (*f)(const Vector&)) {
  Vector out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = f(x.row(i).transpose());
  return out;
}

py::dict batch_to_dict(const ligp::BatchResult& res) {
  const auto n = static_cast<Eigen::Index>(res.sites.size());
  Vector theta(n), nu(n);
  std::vector<bool> ok;
  std::vector<std::string> errors;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = res.sites[static_cast<std::size_t>(i)];
    theta(i) = s.theta_hat;
    nu(i) = s.nu_hat;
    ok.push_back(s.ok);
    errors.push_back(s.error);
  }
  return py::dict("mean"_a = res.means(), "variance"_a = res.variances(), "theta_hat"_a = theta, "nu_hat"_a = nu,
                  "ok"_a = ok, "errors"_a = errors, "loop_seconds"_a = res.loop_seconds,
                  "template_seconds"_a = res.template_seconds, "design_builds"_a = res.design_builds);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Locally induced Gaussian process regression";

  static py::exception<ligp::ParseError> parse_error(m, "ParseError", PyExc_ValueError);
  py::register_exception<ligp::IllConditioned>(m, "IllConditioned", PyExc_ArithmeticError);
  py::register_exception<ligp::DegenerateUpdate>(m, "DegenerateUpdate", PyExc_ArithmeticError);
  py::register_exception<ligp::DegenerateGeometry>(m, "DegenerateGeometry", PyExc_ArithmeticError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ligp::ParseError& e) {
      py::object err = py::reinterpret_borrow<py::object>(parse_error.ptr())(e.what());
      err.attr("row") = e.row();
      err.attr("column") = e.column();
      PyErr_SetObject(parse_error.ptr(), err.ptr());
    }
  });

  m.def("cross_kernel", &ligp::cross_kernel_matrix, "x"_a, "z"_a, "theta"_a,
        "exp(-|x_i - z_j|^2 / theta) for every pair of rows.");

  py::class_<ligp::InducedState>(m, "InducedState")
      .def(py::init([](const Matrix& x_n, const Vector& y_n, const Matrix& x_bar, double theta, double g,
                       double eps_k, double eps_q) {
             ligp::KernelConfig cfg{theta, g, eps_k, eps_q};
             cfg.validate();
             return ligp::build_state(x_n, y_n, x_bar, cfg);
           }),
           "x_n"_a, "y_n"_a, "x_bar"_a, "theta"_a, "g"_a = 1e-6, "eps_k"_a = 1e-6, "eps_q"_a = 1e-5)
      .def_property_readonly("x_bar", [](const ligp::InducedState& s) { return s.x_bar; })
      .def_property_readonly("omega", [](const ligp::InducedState& s) { return s.omega; })
      .def_property_readonly("nu_hat", [](const ligp::InducedState& s) { return s.nu_hat; })
      .def_property_readonly("n", &ligp::InducedState::n)
      .def_property_readonly("m", &ligp::InducedState::m)
      .def("neg_loglik", [](const ligp::InducedState& s) { return ligp::neg_conc_loglik(s); },
           "Concentrated negative log-likelihood, up to constants.")
      .def("predict",
           [](const ligp::InducedState& s, const Matrix& x) {
             Vector mean(x.rows()), var(x.rows());
             for (Eigen::Index i = 0; i < x.rows(); ++i) {
               const auto p = ligp::predict(s, x.row(i).transpose());
               mean(i) = p.mean;
               var(i) = p.variance;
             }
             return py::make_tuple(mean, var);
           },
           "x"_a, "Predictive mean and variance at each row of x.")
      .def("add_inducing", [](const ligp::InducedState& s, const Vector& x) { return ligp::update_add_inducing(s, x).state; },
           "x"_a, "New state with one more inducing point (rank-one update).")
      .def("wimse",
           [](const ligp::InducedState& s, const Vector& cand, const Vector& x_star, const Vector& lower,
              const Vector& upper) { return ligp::wimse(cand, s, ligp::Domain(lower, upper), x_star); },
           "candidate"_a, "x_star"_a, "lower"_a, "upper"_a)
      .def("wimse_grad",
           [](const ligp::InducedState& s, const Vector& cand, const Vector& x_star, const Vector& lower,
              const Vector& upper) { return ligp::wimse_grad(cand, s, ligp::Domain(lower, upper), x_star); },
           "candidate"_a, "x_star"_a, "lower"_a, "upper"_a);

  py::class_<ligp::Template>(m, "Template")
      .def_readonly("offsets", &ligp::Template::offsets)
      .def_readonly("theta0", &ligp::Template::theta0)
      .def_readonly("kind", &ligp::Template::kind)
      .def("save", [](const ligp::Template& t, const std::string& path) { ligp::save_template(t, path); }, "path"_a)
      .def_static("load", &ligp::load_template, "path"_a);

  m.def(
      "build_wimse_template",
      [](const Matrix& x, const Vector& y, Eigen::Index m_, Eigen::Index n, double g, std::uint64_t seed) {
        ligp::DesignOptions opt;
        opt.kernel.g = g;
        opt.seed = seed;
        py::gil_scoped_release release;
        return ligp::build_wimse_template(m_, n, ligp::Dataset(x, y), ligp::Domain::bounding_box(x), opt);
      },
      "x"_a, "y"_a, "m"_a, "n"_a, "g"_a = 1e-6, "seed"_a = 1,
      "Greedy wIMSE design at the median training input, shifted to the origin.");

  m.def(
      "wimse_design",
      [](const Matrix& x, const Vector& y, const Vector& x_star, Eigen::Index m_, Eigen::Index n, double g,
         std::uint64_t seed) {
        ligp::DesignOptions opt;
        opt.kernel.g = g;
        opt.seed = seed;
        py::gil_scoped_release release;
        return ligp::greedy_wimse_design(m_, n, x_star, ligp::Dataset(x, y), ligp::Domain::bounding_box(x), opt).x_bar;
      },
      "x"_a, "y"_a, "x_star"_a, "m"_a, "n"_a, "g"_a = 1e-6, "seed"_a = 1,
      "Bespoke inducing points for one site; row 0 is x_star.");

  m.def("qnorm_points", &ligp::qnorm_points, "m"_a, "x_n"_a, "x_star"_a, "seed"_a = 1);
  m.def("chr_points", &ligp::chr_points, "m"_a, "x_n"_a, "x_star"_a, "seed"_a = 1);
  m.def("lhs", &ligp::lhs, "count"_a, "d"_a, "seed"_a = 1, "Latin hypercube sample on the unit cube.");
  m.def("theta0_quantile", &ligp::theta0_quantile, "x_n"_a);

  m.def(
      "predict",
      [](const Matrix& x, const Vector& y, const Matrix& x_test, const std::string& method, Eigen::Index m_,
         Eigen::Index n, const std::string& theta, double g, std::uint64_t seed, int workers,
         const std::optional<Vector>& lower, const std::optional<Vector>& upper, const ligp::Template* tpl) {
        ligp::PredictConfig cfg;
        cfg.method = ligp::parse_method(method);
        cfg.m = m_;
        cfg.n = n;
        cfg.theta = ligp::ThetaMode::parse(theta);
        cfg.g = g;
        cfg.seed = seed;
        cfg.workers = workers;
        cfg.validate();
        if (x_test.cols() != x.cols()) throw ligp::InvalidArgument("x_test must have as many columns as x");
        Matrix all(x.rows() + x_test.rows(), x.cols());
        all << x, x_test;
        const ligp::Domain domain = make_domain(all, lower, upper);
        const ligp::Dataset data(x, y);
        ligp::BatchResult res;
        {
          py::gil_scoped_release release;
          res = ligp::ligp_predict(cfg, x_test, data, domain, tpl);
        }
        return batch_to_dict(res);
      },
      "x"_a, "y"_a, "x_test"_a, "method"_a = "ligp-qnorm", "m"_a = 10, "n"_a = 100, "theta"_a = "mle", "g"_a = 1e-6,
      "seed"_a = 1, "workers"_a = 1, "lower"_a = py::none(), "upper"_a = py::none(), "template"_a = nullptr,
      "Per-site local prediction; returns a dict of arrays aligned with the rows of x_test.");

  m.def("herbies_tooth", [](const Matrix& x) { return apply_rows(x, &ligp::herbies_tooth); }, "x"_a);
  m.def("borehole", [](const Matrix& x) { return apply_rows(x, &ligp::borehole); }, "x"_a);
  m.def("borehole_bounds", [] {
    const ligp::Domain d = ligp::borehole_ranges();
    return py::make_tuple(d.lower, d.upper);
  });
  m.def("rmse", &ligp::rmse, "pred"_a, "truth"_a);
  m.def("rmspe", &ligp::rmspe, "pred"_a, "truth"_a);

  m.def(
      "run_experiment",
      [](const std::string& text, const std::optional<std::string>& out_dir) {
        const ligp::ExperimentSpec spec = ligp::parse_experiment(text);
        ligp::MetricReport report;
        {
          py::gil_scoped_release release;
          report = ligp::run_experiment(spec);
        }
        if (out_dir) ligp::write_report(report, *out_dir);
        return ligp::report_json(report);
      },
      "config_json"_a, "out_dir"_a = py::none(),
      "Runs a JSON experiment description and returns the metric report as JSON text.");

  m.def(
      "validate",
      [](std::uint64_t seed, int scale) {
        namespace v = ligp::validation;
        std::vector<v::SuiteResult> results;
        {
          py::gil_scoped_release release;
          if (scale <= 0) {
            results = v::run_all(seed);
          } else {
            results = {v::quadrature_suite(scale, seed), v::gradient_suite(scale, seed + 1),
                       v::woodbury_suite(scale, seed + 2), v::update_suite(scale, seed + 3),
                       v::reduction_suite(scale, seed + 4)};
          }
        }
        py::list out;
        for (const auto& r : results) {
          out.append(py::dict("name"_a = r.name, "passed"_a = r.passed, "max_error"_a = r.max_error,
                              "tolerance"_a = r.tolerance, "instances"_a = r.instances));
        }
        return out;
      },
      "seed"_a = 7, "instances"_a = 0, "Oracle suites; instances=0 uses the full default sizes.");
}
