#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ifvb/elbo.hpp"
#include "ifvb/errors.hpp"
#include "ifvb/family.hpp"
#include "ifvb/fisher.hpp"
#include "ifvb/harness.hpp"
#include "ifvb/model.hpp"
#include "ifvb/optim.hpp"
#include "ifvb/rng.hpp"
#include "ifvb/specfun.hpp"
#include "ifvb/version.hpp"

namespace py = pybind11;
using namespace ifvb;

namespace {

std::shared_ptr<const Model> model_from_spec(const ExperimentSpec& spec) {
  return make_model(spec, make_dataset(spec));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Inversion-free natural-gradient variational Bayes";
  m.attr("__version__") = kVersion;

  m.def("log_gamma", &specfun::log_gamma, py::arg("x"));
  m.def("digamma", &specfun::digamma, py::arg("x"));
  m.def("trigamma", &specfun::trigamma, py::arg("x"));

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("uniform", &Rng::uniform)
      .def("normal", &Rng::normal)
      .def("gamma", &Rng::gamma, py::arg("shape"));

  py::enum_<FisherMode>(m, "FisherMode")
      .value("dense", FisherMode::dense)
      .value("compact", FisherMode::compact);

  py::class_<FisherConfig>(m, "FisherConfig")
      .def(py::init<>())
      .def_readwrite("epsilon", &FisherConfig::epsilon)
      .def_readwrite("c_beta", &FisherConfig::c_beta)
      .def_readwrite("beta", &FisherConfig::beta)
      .def_readwrite("capacity", &FisherConfig::capacity);

  py::class_<FisherInverseState>(m, "FisherInverseState")
      .def(py::init<int, const FisherConfig&, FisherMode>(), py::arg("dim"), py::arg("config"),
           py::arg("mode") = FisherMode::dense)
      .def("absorb_score", &FisherInverseState::absorb_score, py::arg("phi"))
      .def("absorb_regularizer", &FisherInverseState::absorb_regularizer, py::arg("z"))
      .def("apply_inverse", &FisherInverseState::apply_inverse, py::arg("v"),
           py::arg("scaled") = false)
      .def("dense_matrix", &FisherInverseState::dense_matrix)
      .def_property_readonly("count", &FisherInverseState::count)
      .def_property_readonly("reg_count", &FisherInverseState::reg_count)
      .def_property_readonly("min_denominator", &FisherInverseState::min_denominator)
      .def_property_readonly("fallback_count", &FisherInverseState::fallback_count);

  py::class_<Family, std::shared_ptr<Family>>(m, "Family")
      .def_property_readonly("name", &Family::name)
      .def_property_readonly("dim", &Family::dim)
      .def_property_readonly("theta_dim", &Family::theta_dim)
      .def("in_domain", &Family::in_domain, py::arg("lam"))
      .def("sample", &Family::sample, py::arg("lam"), py::arg("rng"))
      .def("log_density", &Family::log_density, py::arg("lam"), py::arg("theta"))
      .def("score", &Family::score, py::arg("lam"), py::arg("theta"))
      .def("exact_fisher", &Family::exact_fisher, py::arg("lam"))
      .def("project_to_domain", &Family::project_to_domain, py::arg("lam"));

  m.def("make_family", [](const std::string& id) {
    return std::const_pointer_cast<Family>(make_family(id));
  }, py::arg("id"));

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("covariates", &Dataset::covariates)
      .def_readwrite("response", &Dataset::response)
      .def("save_csv", &Dataset::save_csv, py::arg("path"))
      .def_static("load_csv", &Dataset::load_csv, py::arg("path"), py::arg("covariate_cols"));

  py::class_<Model, std::shared_ptr<Model>>(m, "Model")
      .def_property_readonly("name", &Model::name)
      .def("log_joint", &Model::log_joint, py::arg("theta"))
      .def("exact_lb", &Model::exact_lb, py::arg("family"), py::arg("lam"))
      .def("exact_lb_gradient", &Model::exact_lb_gradient, py::arg("family"), py::arg("lam"))
      .def("optimum", &Model::optimum);

  m.def("h_lambda", &h_lambda, py::arg("model"), py::arg("family"), py::arg("lam"),
        py::arg("theta"));
  m.def(
      "estimate_gradient",
      [](const Model& model, const Family& family, const Eigen::VectorXd& lam, long samples,
         Rng& rng) {
        const GradientEstimate g = estimate_gradient(model, family, lam, samples, rng);
        return g.grad;
      },
      py::arg("model"), py::arg("family"), py::arg("lam"), py::arg("samples"), py::arg("rng"));
  m.def("estimate_lb", &estimate_lb, py::arg("model"), py::arg("family"), py::arg("lam"),
        py::arg("samples"), py::arg("rng"));

  py::enum_<OptimizerKind>(m, "OptimizerKind")
      .value("sga", OptimizerKind::sga)
      .value("ngvb", OptimizerKind::ngvb)
      .value("ifvb", OptimizerKind::ifvb)
      .value("aifvb", OptimizerKind::aifvb);

  py::class_<OptimizerConfig>(m, "OptimizerConfig")
      .def(py::init<>())
      .def_readwrite("c_alpha", &OptimizerConfig::c_alpha)
      .def_readwrite("c_alpha_prime", &OptimizerConfig::c_alpha_prime)
      .def_readwrite("alpha", &OptimizerConfig::alpha)
      .def_readwrite("fisher", &OptimizerConfig::fisher)
      .def_readwrite("fisher_mode", &OptimizerConfig::fisher_mode)
      .def_readwrite("fisher_samples", &OptimizerConfig::fisher_samples)
      .def_readwrite("B", &OptimizerConfig::gradient_samples)
      .def_readwrite("w", &OptimizerConfig::averaging_exponent)
      .def_readwrite("clip_threshold", &OptimizerConfig::clip_threshold)
      .def_readwrite("tol", &OptimizerConfig::tol)
      .def_readwrite("max_iters", &OptimizerConfig::max_iters)
      .def_readwrite("seed", &OptimizerConfig::seed);

  py::enum_<RunStatus>(m, "RunStatus")
      .value("converged", RunStatus::converged)
      .value("max_iters_reached", RunStatus::max_iters_reached)
      .value("stalled", RunStatus::stalled)
      .value("numeric_error", RunStatus::numeric_error);

  py::class_<TraceRecord>(m, "TraceRecord")
      .def_readonly("iter", &TraceRecord::iter)
      .def_readonly("elapsed_ms", &TraceRecord::elapsed_ms)
      .def_readonly("elbo", &TraceRecord::elbo)
      .def_readonly("param_error", &TraceRecord::param_error)
      .def_readonly("grad_norm", &TraceRecord::grad_norm)
      .def_readonly("min_denominator", &TraceRecord::min_denominator)
      .def_readonly("fallback_count", &TraceRecord::fallback_count);

  m.def(
      "run",
      [](OptimizerKind kind, const Model& model, const Family& family,
         const Eigen::VectorXd& lambda0, const OptimizerConfig& config, long elbo_eval_samples,
         std::optional<Eigen::VectorXd> reference) {
        DiagnosticsConfig diag;
        diag.elbo_eval_samples = elbo_eval_samples;
        diag.reference = std::move(reference);
        RunResult result = run(kind, model, family, lambda0, config, diag);
        py::dict out;
        out["lambda"] = result.state.lambda;
        out["lambda_bar"] = result.state.lambda_bar;
        out["reported"] = result.reported(kind);
        out["status"] = result.status;
        out["message"] = result.message;
        out["trace"] = result.trace;
        return out;
      },
      py::arg("kind"), py::arg("model"), py::arg("family"), py::arg("lambda0"),
      py::arg("config"), py::arg("elbo_eval_samples") = 0,
      py::arg("reference") = std::nullopt);

  py::class_<ExperimentSpec>(m, "ExperimentSpec")
      .def_readwrite("experiment", &ExperimentSpec::experiment)
      .def_readwrite("model_id", &ExperimentSpec::model_id)
      .def_readwrite("optimizers", &ExperimentSpec::optimizers)
      .def_readwrite("lambda0", &ExperimentSpec::lambda0)
      .def_readwrite("config", &ExperimentSpec::config)
      .def_readwrite("data_source", &ExperimentSpec::data_source)
      .def_readwrite("out_dir", &ExperimentSpec::out_dir)
      .def_readwrite("eval_samples", &ExperimentSpec::eval_samples);

  m.def("parse_spec", &parse_spec, py::arg("text"));
  m.def("render_spec", &render_spec, py::arg("spec"));
  m.def("make_dataset", &make_dataset, py::arg("spec"));
  m.def("make_model", [](const ExperimentSpec& spec) {
    return std::const_pointer_cast<Model>(model_from_spec(spec));
  }, py::arg("spec"));
  m.def("family_for_spec", [](const ExperimentSpec& spec) {
    const Dataset d = make_dataset(spec);
    return std::const_pointer_cast<Family>(
        family_for_model(spec.model_id, static_cast<int>(d.covariates.cols())));
  }, py::arg("spec"));

  py::class_<OptimizerOutcome>(m, "OptimizerOutcome")
      .def_readonly("optimizer", &OptimizerOutcome::optimizer)
      .def_readonly("trace_path", &OptimizerOutcome::trace_path)
      .def_readonly("status", &OptimizerOutcome::status)
      .def_readonly("message", &OptimizerOutcome::message)
      .def_readonly("final_lambda", &OptimizerOutcome::final_lambda);

  m.def("run_experiment", &run_experiment, py::arg("spec"), py::arg("parallel") = false,
        py::call_guard<py::gil_scoped_release>());

  py::class_<FisherDiagnosticRow>(m, "FisherDiagnosticRow")
      .def_readonly("s", &FisherDiagnosticRow::s)
      .def_readonly("err_plain", &FisherDiagnosticRow::err_plain)
      .def_readonly("err_reg", &FisherDiagnosticRow::err_reg);

  py::class_<FisherDiagnosticReport>(m, "FisherDiagnosticReport")
      .def_readonly("rows", &FisherDiagnosticReport::rows)
      .def_readonly("final_err_plain", &FisherDiagnosticReport::final_err_plain)
      .def_readonly("final_err_reg", &FisherDiagnosticReport::final_err_reg);

  m.def("fisher_diagnostic", &fisher_diagnostic, py::arg("family"), py::arg("lam"),
        py::arg("s_max"), py::arg("config"), py::arg("seed"));

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
}
