#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "shapecox/baselines.hpp"
#include "shapecox/breslow.hpp"
#include "shapecox/errors.hpp"
#include "shapecox/parallel.hpp"
#include "shapecox/partial_likelihood.hpp"
#include "shapecox/shape_solvers.hpp"
#include "shapecox/sim_harness.hpp"
#include "shapecox/smple_fit.hpp"
#include "shapecox/survival_core.hpp"
#include "shapecox/variance_inference.hpp"

namespace py = pybind11;
using namespace shapecox;

namespace {

std::vector<Shape> parse_shapes(const std::vector<std::string>& names) {
  std::vector<Shape> out;
  out.reserve(names.size());
  for (const auto& s : names) out.push_back(parse_shape(s));
  return out;
}

FitOptions fit_options(double tol, int max_iter, std::optional<Eigen::VectorXd> beta_init) {
  FitOptions o;
  o.tol_loglik = tol;
  o.max_outer_iters = max_iter;
  o.beta_init = std::move(beta_init);
  return o;
}

Eigen::MatrixXd as_matrix(std::optional<Eigen::MatrixXd> m, Index n) {
  return m ? *m : Eigen::MatrixXd(n, 0);
}

}  // namespace

PYBIND11_MODULE(_shapecox, m) {
  m.doc() = "Shape-restricted partial likelihood estimation for the partly linear additive Cox model";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<SingularError>(m, "SingularError", base.ptr());
  py::register_exception<FitError>(m, "FitError", base.ptr());

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](Eigen::VectorXd time, Eigen::VectorXi status, std::optional<Eigen::MatrixXd> x,
                       std::optional<Eigen::MatrixXd> z) {
             const Index n = time.size();
             return Dataset(std::move(time), std::move(status), as_matrix(std::move(x), n),
                            as_matrix(std::move(z), n));
           }),
           py::arg("time"), py::arg("status"), py::arg("x") = py::none(), py::arg("z") = py::none())
      .def_static(
          "from_csv",
          [](const std::filesystem::path& path, const std::string& time, const std::string& status,
             std::vector<std::string> x, std::vector<std::string> z) {
            return load_csv(path, {time, status, std::move(x), std::move(z)});
          },
          py::arg("path"), py::arg("time"), py::arg("status"), py::arg("x") = std::vector<std::string>{},
          py::arg("z") = std::vector<std::string>{})
      .def("__len__", &Dataset::size)
      .def_property_readonly("time", &Dataset::time)
      .def_property_readonly("status", &Dataset::status)
      .def_property_readonly("x", &Dataset::x)
      .def_property_readonly("z", &Dataset::z)
      .def_property_readonly("num_events", &Dataset::num_events)
      .def_property_readonly("tau", &Dataset::tau)
      .def("subset", [](const Dataset& ds, const std::vector<Index>& rows) { return ds.subset(rows); })
      .def("checksum", &Dataset::checksum);

  m.def("risk_set_sizes", &risk_set_sizes, py::arg("dataset"));
  m.def("log_partial_likelihood", &log_partial_likelihood, py::arg("dataset"), py::arg("r"));
  m.def("score", &score_in_r, py::arg("dataset"), py::arg("r"));
  m.def("curvature_weights", &curvature_weights, py::arg("dataset"), py::arg("r"));

  py::class_<AdditiveComponent>(m, "Component")
      .def_readonly("knots", &AdditiveComponent::knots)
      .def_readonly("values", &AdditiveComponent::values)
      .def_property_readonly("shape", [](const AdditiveComponent& c) { return std::string(shape_name(c.shape)); })
      .def("__call__", &AdditiveComponent::operator(), py::arg("t"))
      .def("__call__", [](const AdditiveComponent& c, const Eigen::VectorXd& t) {
        return Eigen::VectorXd(t.unaryExpr([&c](double v) { return c(v); }));
      });

  m.def(
      "isotonic",
      [](const std::vector<double>& y, const std::vector<double>& w, bool increasing) {
        return weighted_isotonic(y, w, increasing ? Direction::Increasing : Direction::Decreasing);
      },
      py::arg("y"), py::arg("w"), py::arg("increasing") = true);
  m.def(
      "fit_shape",
      [](const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w,
         const std::string& shape) { return fit_shape(x, y, w, parse_shape(shape)); },
      py::arg("x"), py::arg("y"), py::arg("w"), py::arg("shape"));

  py::class_<FittedModel>(m, "FittedModel")
      .def_readonly("beta", &FittedModel::beta)
      .def_readonly("components", &FittedModel::components)
      .def_readonly("r_hat", &FittedModel::r_hat)
      .def_readonly("loglik", &FittedModel::loglik)
      .def_readonly("iterations", &FittedModel::iters)
      .def_readonly("converged", &FittedModel::converged)
      .def_readonly("centering_residuals", &FittedModel::centering_residuals)
      .def_readonly("loglik_trace", &FittedModel::loglik_trace)
      .def_readonly("warnings", &FittedModel::warnings)
      .def(
          "predict",
          [](const FittedModel& fm, const std::vector<double>& x, const std::vector<double>& z) {
            return predict_r(fm, x, z);
          },
          py::arg("x"), py::arg("z"));

  m.def(
      "fit_smple",
      [](const Dataset& ds, const std::vector<std::string>& shapes, double tol, int max_iter,
         std::optional<Eigen::VectorXd> beta_init) {
        const auto s = parse_shapes(shapes);
        const auto o = fit_options(tol, max_iter, std::move(beta_init));
        py::gil_scoped_release release;
        return fit_smple(ds, s, o);
      },
      py::arg("dataset"), py::arg("shapes"), py::arg("tol") = 1e-8, py::arg("max_iter") = 200,
      py::arg("beta_init") = py::none());

  py::class_<TcrFit>(m, "TcrFit")
      .def_readonly("beta", &TcrFit::beta)
      .def_readonly("loglik", &TcrFit::loglik)
      .def_readonly("iterations", &TcrFit::iters)
      .def_readonly("converged", &TcrFit::converged);

  m.def(
      "fit_tcr",
      [](const Dataset& ds, double tol, int max_iter) {
        const auto cols = all_columns(ds);
        const auto o = fit_options(tol, max_iter, std::nullopt);
        py::gil_scoped_release release;
        return fit_tcr(ds, cols, o);
      },
      py::arg("dataset"), py::arg("tol") = 1e-8, py::arg("max_iter") = 200,
      "Ordinary Cox fit treating every linear and additive column as linear.");

  py::class_<CumulativeHazard>(m, "CumulativeHazard")
      .def_readonly("times", &CumulativeHazard::times)
      .def_readonly("increments", &CumulativeHazard::increments)
      .def_readonly("cumulative", &CumulativeHazard::cumulative)
      .def("__call__", &eval_hazard, py::arg("y"))
      .def("survival", &baseline_survival, py::arg("y"));

  m.def("breslow", &breslow_hazard, py::arg("dataset"), py::arg("r"));

  py::class_<SplitVariance>(m, "SplitVariance")
      .def_readonly("sigma_hat", &SplitVariance::sigma_hat)
      .def_readonly("alpha_tilde", &SplitVariance::alpha_tilde)
      .def_readonly("k_n", &SplitVariance::k_n)
      .def_readonly("m_n", &SplitVariance::m_n)
      .def_readonly("repeats", &SplitVariance::repeats)
      .def_readonly("dropped_repeats", &SplitVariance::dropped_repeats)
      .def_readonly("n", &SplitVariance::n)
      .def_readonly("warnings", &SplitVariance::warnings)
      .def(
          "wald_interval",
          [](const SplitVariance& sv, const Eigen::VectorXd& theta, double level, Index coordinate) {
            return wald_interval(theta, sv, level, coordinate);
          },
          py::arg("theta"), py::arg("level") = 0.95, py::arg("coordinate") = 0)
      .def(
          "chisq_test",
          [](const SplitVariance& sv, const Eigen::VectorXd& theta, const Eigen::VectorXd& theta0, double alpha) {
            const auto t = chisq_test(theta, theta0, sv, alpha);
            return py::dict(py::arg("statistic") = t.statistic, py::arg("critical") = t.critical,
                            py::arg("reject") = t.reject);
          },
          py::arg("theta"), py::arg("theta0"), py::arg("alpha") = 0.05);

  m.def("split_sizes", &split_sizes, py::arg("n"), py::arg("alpha_tilde"));
  m.def(
      "split_variance",
      [](const Dataset& ds, const std::vector<std::string>& shapes, double alpha_tilde, int repeats,
         std::uint64_t seed, int threads) {
        const auto s = parse_shapes(shapes);
        SubsampleEstimator est = [&](std::span<const Index> rows) -> std::optional<Eigen::VectorXd> {
          return fit_smple(ds.subset(rows), s).beta;
        };
        SplitOptions o;
        o.alpha_tilde = alpha_tilde;
        o.repeats = repeats;
        o.seed = seed;
        o.threads = resolve_threads(threads);
        py::gil_scoped_release release;
        return split_variance(ds.size(), est, o);
      },
      py::arg("dataset"), py::arg("shapes"), py::arg("alpha_tilde") = 0.3, py::arg("repeats") = 20,
      py::arg("seed") = 0, py::arg("threads") = 0,
      "Sample-splitting covariance of the SMPLE coefficient vector.");

  m.def("chisq_cdf", &chisq_cdf, py::arg("x"), py::arg("dof"));
  m.def("chisq_quantile", &chisq_quantile, py::arg("q"), py::arg("dof"));
  m.def("normal_cdf", &normal_cdf, py::arg("x"));
  m.def("normal_quantile", &normal_quantile, py::arg("q"));

  m.def(
      "generate",
      [](const std::string& scenario, Index n, double c, std::uint64_t seed) {
        Scenario sc;
        sc.id = parse_scenario(scenario);
        sc.n = n;
        sc.c = c;
        return generate(sc, seed);
      },
      py::arg("scenario"), py::arg("n"), py::arg("c") = 5.0, py::arg("seed") = 1);

  m.def(
      "run_study",
      [](const std::string& scenario, Index n, double c, int reps, std::uint64_t seed,
         const std::vector<std::string>& estimators, bool coverage, double alpha_tilde, int repeats, double level,
         bool distance, int threads) {
        Scenario sc;
        sc.id = parse_scenario(scenario);
        sc.n = n;
        sc.c = c;
        StudyOptions o;
        o.estimators.clear();
        for (const auto& e : estimators) {
          if (e == "smple" || e == "SMPLE")
            o.estimators.push_back(Estimator::Smple);
          else if (e == "tcr" || e == "TCR")
            o.estimators.push_back(Estimator::Tcr);
          else
            throw py::value_error("unknown estimator '" + e + "' (expected smple or tcr)");
        }
        o.n_reps = reps;
        o.seed = seed;
        o.coverage = coverage;
        o.alpha_tilde = alpha_tilde;
        o.repeats = repeats;
        o.level = level;
        o.distance = distance;
        o.threads = threads;
        RepSummary s;
        {
          py::gil_scoped_release release;
          s = run_study(sc, o);
        }
        py::list rows;
        for (const auto& e : s.estimators)
          rows.append(py::dict(py::arg("estimator") = std::string(estimator_name(e.estimator)),
                               py::arg("rmse_x100") = e.rmse_x100, py::arg("bias_x100") = e.bias_x100,
                               py::arg("median_abs_error") = e.median_abs_error, py::arg("n_ok") = e.n_ok,
                               py::arg("dropped") = e.dropped, py::arg("n_ci") = e.n_ci,
                               py::arg("coverage") = e.coverage, py::arg("avg_length") = e.avg_length));
        return py::dict(py::arg("estimators") = rows, py::arg("censoring") = s.censoring,
                        py::arg("median_distance") = s.median_distance);
      },
      py::arg("scenario"), py::arg("n"), py::arg("c") = 5.0, py::arg("reps") = 200, py::arg("seed") = 1,
      py::arg("estimators") = std::vector<std::string>{"smple", "tcr"}, py::arg("coverage") = false,
      py::arg("alpha_tilde") = 0.35, py::arg("repeats") = 20, py::arg("level") = 0.95, py::arg("distance") = false,
      py::arg("threads") = 0);
}
