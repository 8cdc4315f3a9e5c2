#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "sfde_tem/brownian.hpp"
#include "sfde_tem/error.hpp"
#include "sfde_tem/experiments.hpp"
#include "sfde_tem/model.hpp"
#include "sfde_tem/scheme.hpp"

namespace py = pybind11;

namespace {

std::vector<std::vector<double>> rows(const std::vector<double>& flat, std::size_t dim) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i + dim <= flat.size(); i += dim) {
    out.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(i),
                     flat.begin() + static_cast<std::ptrdiff_t>(i + dim));
  }
  return out;
}

sfde::Reference parse_reference(const std::string& name) {
  if (name == "fine_scheme") return sfde::Reference::fine_scheme;
  if (name == "closed_form") return sfde::Reference::closed_form;
  throw sfde::ConfigError("unknown reference '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Truncated Euler-Maruyama scheme for stochastic functional differential equations";

  py::register_exception<sfde::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<sfde::DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<sfde::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<sfde::SfdeModel>(m, "Model")
      .def_property_readonly("name", &sfde::SfdeModel::name)
      .def_property_readonly("dim_state", &sfde::SfdeModel::dim_state)
      .def_property_readonly("dim_noise", &sfde::SfdeModel::dim_noise)
      .def_property_readonly("tau", &sfde::SfdeModel::tau)
      .def_property_readonly("k_const", [](const sfde::SfdeModel& self) { return self.gamma().k_const; })
      .def_property_readonly("lam", [](const sfde::SfdeModel& self) { return self.gamma().lambda; })
      .def("truncation_radius",
           [](const sfde::SfdeModel& self, double step) { return sfde::truncation_radius(self.gamma(), step); })
      .def("initial_data", py::overload_cast<double>(&sfde::SfdeModel::initial_data, py::const_))
      .def("with_k_const", &sfde::SfdeModel::with_k_const)
      .def("__repr__", [](const sfde::SfdeModel& self) { return "<sfde_tem.Model " + self.name() + ">"; });

  m.def("example1", &sfde::builtin_example1);
  m.def("example2", &sfde::builtin_example2);
  m.def("gbm", &sfde::builtin_gbm_oracle, py::arg("a"), py::arg("b"), py::arg("x0"), py::arg("tau") = 1.0);
  m.def(
      "make_builtin",
      [](const std::string& name, double a, double b, double x0) {
        return sfde::make_builtin(name, sfde::BuiltinParams{a, b, x0});
      },
      py::arg("name"), py::arg("a") = 1.0, py::arg("b") = 0.5, py::arg("x0") = 1.0);

  m.def("truncate", [](const std::vector<double>& x, double radius) { return sfde::truncate(x, radius); });
  m.def("gamma_inverse_numeric", &sfde::gamma_inverse_numeric, py::arg("gamma"), py::arg("y"));
  m.def("rate_lambda", &sfde::rate_lambda, py::arg("q_bar"), py::arg("p"), py::arg("r"));
  m.def("admissible_nu", &sfde::admissible_nu, py::arg("b1"), py::arg("b2"), py::arg("b3"),
        py::arg("b4"), py::arg("p"), py::arg("tau"));
  m.def("fit_rate", [](const std::vector<double>& steps, const std::vector<double>& errors) {
    return sfde::fit_rate(steps, errors);
  });

  m.def(
      "brownian_increments",
      [](std::uint64_t seed, std::uint64_t replica, std::size_t dim, double step, double horizon) {
        const auto grid = sfde::BrownianGrid::generate(seed, replica, dim, step, horizon);
        return std::vector<double>(grid.increments().begin(), grid.increments().end());
      },
      py::arg("seed"), py::arg("replica"), py::arg("dim"), py::arg("step"), py::arg("horizon"));
  m.def("coarsen",
        [](const std::vector<double>& inc, std::size_t dim, std::size_t factor) {
          return sfde::coarsen(inc, dim, factor);
        },
        py::arg("increments"), py::arg("dim"), py::arg("factor"));

  m.def(
      "simulate",
      [](const sfde::SfdeModel& model, double step, double horizon, std::uint64_t seed,
         std::uint64_t replica, const std::string& variant, std::size_t stride) {
        const sfde::SchemeConfig config{step, horizon, sfde::parse_variant(variant)};
        const auto grid = sfde::resolve_grid(model, config);
        const auto noise = sfde::BrownianGrid::generate(seed, replica, model.dim_noise(), grid.step,
                                                        static_cast<double>(grid.total_steps) * grid.step);
        const auto rec = sfde::simulate(model, config, noise.increments(), sfde::RecordOptions{.stride = stride});
        py::dict out;
        out["times"] = rec.times;
        out["states"] = rows(rec.states, rec.dim);
        out["radius"] = rec.radius;
        out["truncation_hits"] = rec.truncation_hits;
        out["diverged"] = rec.diverged;
        return out;
      },
      py::arg("model"), py::arg("step"), py::arg("horizon"), py::arg("seed") = 42, py::arg("replica") = 0,
      py::arg("variant") = "truncated_em", py::arg("stride") = 1);

  m.def(
      "strong_error",
      [](const sfde::SfdeModel& model, const std::vector<double>& steps, double step_ref, double horizon,
         std::size_t samples, std::uint64_t seed, const std::string& reference) {
        sfde::StrongErrorOptions opts;
        opts.steps = steps;
        opts.step_ref = step_ref;
        opts.horizon = horizon;
        opts.samples = samples;
        opts.seed = seed;
        opts.reference = parse_reference(reference);
        const auto table = sfde::strong_error(model, opts);
        py::dict out;
        out["steps"] = table.steps;
        out["rms_errors"] = table.rms_errors;
        out["std_errors"] = table.std_errors;
        out["slope"] = table.fitted_slope;
        out["degenerate"] = table.degenerate;
        return out;
      },
      py::arg("model"), py::arg("steps"), py::arg("step_ref"), py::arg("horizon"),
      py::arg("samples") = 1000, py::arg("seed") = 42, py::arg("reference") = "fine_scheme");

  m.def(
      "moment_estimate",
      [](const sfde::SfdeModel& model, double step, double horizon, double p, std::size_t samples,
         std::uint64_t seed, const std::string& variant) {
        sfde::MomentOptions opts;
        opts.scheme = sfde::SchemeConfig{step, horizon, sfde::parse_variant(variant)};
        opts.p = p;
        opts.samples = samples;
        opts.seed = seed;
        const auto report = sfde::moment_estimate(model, opts);
        py::dict out;
        out["times"] = report.times;
        out["moments"] = report.moments;
        out["running_max"] = report.running_max;
        out["max_moment"] = report.max_moment;
        out["diverged"] = report.diverged;
        return out;
      },
      py::arg("model"), py::arg("step"), py::arg("horizon"), py::arg("p") = 2.0, py::arg("samples") = 1000,
      py::arg("seed") = 42, py::arg("variant") = "truncated_em");

  m.def(
      "stability_decay",
      [](const sfde::SfdeModel& model, double step, double horizon, double p, std::size_t samples,
         std::uint64_t seed, double tail_fraction) {
        sfde::StabilityOptions opts;
        opts.scheme = sfde::SchemeConfig{step, horizon, sfde::Variant::truncated_em};
        opts.p = p;
        opts.samples = samples;
        opts.seed = seed;
        opts.tail_fraction = tail_fraction;
        const auto report = sfde::stability_decay(model, opts);
        py::dict out;
        out["times"] = report.times;
        out["log_moment"] = report.log_moment;
        out["sample_mean"] = rows(report.sample_mean, report.dim);
        out["pathwise_rates"] = report.pathwise_rates;
        out["moment_rate"] = report.moment_rate;
        out["clamped"] = report.clamped;
        return out;
      },
      py::arg("model"), py::arg("step"), py::arg("horizon"), py::arg("p") = 2.0, py::arg("samples") = 1000,
      py::arg("seed") = 42, py::arg("tail_fraction") = 0.6);
}
