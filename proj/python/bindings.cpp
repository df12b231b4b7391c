#include "curvlab/diffusion.hpp"
#include "curvlab/entropy.hpp"
#include "curvlab/gamma2.hpp"
#include "curvlab/io.hpp"
#include "curvlab/linearized.hpp"
#include "curvlab/odelab.hpp"
#include "curvlab/scenario.hpp"
#include "curvlab/transport.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace curvlab;

namespace {

DensityField density(const FiniteSpace& s, const Field& values) { return DensityField(s, values); }

const char* grid_name(GridKind g) {
  switch (g) {
    case GridKind::path:
      return "path";
    case GridKind::circle:
      return "circle";
    default:
      return "none";
  }
}

}  // namespace

PYBIND11_MODULE(_curvlab, mod) {
  mod.doc() = "Curvature-dimension checks on finite metric measure spaces";

  py::register_exception<NumericalError>(mod, "NumericalError", PyExc_RuntimeError);
  py::register_exception<ParseError>(mod, "ParseError", PyExc_ValueError);

  py::class_<CheckReport>(mod, "CheckReport")
      .def_readonly("name", &CheckReport::name)
      .def_readonly("holds", &CheckReport::holds)
      .def_readonly("margin", &CheckReport::margin)
      .def_readonly("tolerance", &CheckReport::tolerance)
      .def_readonly("witness", &CheckReport::witness)
      .def_readonly("residuals", &CheckReport::residuals)
      .def_readonly("diagnostics", &CheckReport::diagnostics)
      .def_property_readonly("verdict", &CheckReport::verdict)
      .def("__repr__", [](const CheckReport& r) { return "<CheckReport " + verdict_line(r) + ">"; });

  py::class_<FiniteSpace>(mod, "FiniteSpace")
      .def(py::init<Eigen::VectorXd, Eigen::MatrixXd, Eigen::MatrixXd>(), py::arg("m"), py::arg("d"),
           py::arg("w"))
      .def_property_readonly("n", &FiniteSpace::n)
      .def_property_readonly("measure", &FiniteSpace::measure)
      .def_property_readonly("metric", &FiniteSpace::metric)
      .def_property_readonly("conductance", &FiniteSpace::conductance)
      .def_property_readonly("connected", &FiniteSpace::connected)
      .def_property_readonly("grid", [](const FiniteSpace& s) { return grid_name(s.grid()); })
      .def_property_readonly("spacing", &FiniteSpace::spacing)
      .def_property_readonly("length", &FiniteSpace::length)
      .def("__len__", &FiniteSpace::size);

  mod.def("two_point_space", &two_point_space);
  mod.def("path_grid", &path_grid, py::arg("n"), py::arg("length") = 1.0);
  mod.def("circle_grid", &circle_grid, py::arg("n"), py::arg("length") = 1.0);
  mod.def("complete_graph", &complete_graph, py::arg("n"));
  mod.def(
      "erdos_renyi", [](int n, double p, std::uint64_t seed, bool random_weights) {
        return erdos_renyi(n, p, seed, random_weights);
      },
      py::arg("n"), py::arg("p"), py::arg("seed"), py::arg("random_weights") = false);
  mod.def("space_from_conductances", &space_from_conductances, py::arg("m"), py::arg("w"));
  mod.def("read_graph", &read_graph_file, py::arg("path"));
  mod.def("format_graph", &format_graph, py::arg("space"));

  mod.def("laplacian", &laplacian, py::arg("space"), py::arg("f"));
  mod.def("gamma", py::overload_cast<const FiniteSpace&, const Field&, const Field&>(&gamma), py::arg("space"),
          py::arg("f"), py::arg("g"));
  mod.def("dirichlet_energy",
          py::overload_cast<const FiniteSpace&, const Field&, const Field&>(&dirichlet_energy), py::arg("space"),
          py::arg("f"), py::arg("g"));
  mod.def("integrate", py::overload_cast<const FiniteSpace&, const Field&>(&integrate), py::arg("space"),
          py::arg("f"));
  mod.def("heat_flow", &heat_flow, py::arg("space"), py::arg("f"), py::arg("t"));
  mod.def("resolution_tolerance", &resolution_tolerance, py::arg("space"), py::arg("tau"));

  py::class_<EntropyModel>(mod, "EntropyModel")
      .def_static("linear", &EntropyModel::linear)
      .def_static("power", &EntropyModel::power, py::arg("N"))
      .def_static("custom", &EntropyModel::custom, py::arg("P"), py::arg("dP"), py::arg("a") = 0.0)
      .def("regularized", &EntropyModel::regularized, py::arg("eps"), py::arg("M") = kInf)
      .def_property_readonly("N", &EntropyModel::N)
      .def("P", &EntropyModel::P)
      .def("dP", &EntropyModel::dP)
      .def("Q", &EntropyModel::Q)
      .def("R", &EntropyModel::R)
      .def("U", &EntropyModel::U)
      .def("regularity", &EntropyModel::regularity)
      .def("regular", &EntropyModel::regular)
      .def("lambda_", &EntropyModel::lambda, py::arg("K"))
      .def("__repr__", &EntropyModel::describe);

  mod.def("sigma_coeff", [](double kappa, double t, double delta) { return sigma_coeff(kappa, t, delta).value; },
          py::arg("kappa"), py::arg("t"), py::arg("delta"));
  mod.def("green_weight", &green_weight, py::arg("s"), py::arg("t"));
  mod.def("mccann_check", &mccann_check, py::arg("model"), py::arg("N"), py::arg("r_grid"), py::arg("tol") = 1e-12);

  py::class_<Gamma2Report>(mod, "Gamma2Report")
      .def_readonly("value", &Gamma2Report::value)
      .def_readonly("K", &Gamma2Report::K)
      .def_readonly("N", &Gamma2Report::N)
      .def_readonly("holds", &Gamma2Report::holds)
      .def_readonly("margin", &Gamma2Report::margin)
      .def_readonly("worst_point", &Gamma2Report::worst_point)
      .def_readonly("witness", &Gamma2Report::witness)
      .def_readonly("point_margins", &Gamma2Report::point_margins);
  mod.def("gamma2_form", py::overload_cast<const FiniteSpace&, const Field&, const Field&>(&gamma2_form),
          py::arg("space"), py::arg("f"), py::arg("phi"));
  mod.def("be_check", &be_check, py::arg("space"), py::arg("K"), py::arg("N") = kInf);
  mod.def("optimal_curvature", &optimal_curvature, py::arg("space"), py::arg("N") = kInf);
  mod.def("hamiltonian_residual", &hamiltonian_residual, py::arg("space"), py::arg("model"), py::arg("rho"),
          py::arg("phi"), py::arg("tol") = 1e-12);

  py::class_<DiffusionTrajectory>(mod, "DiffusionTrajectory")
      .def_readonly("times", &DiffusionTrajectory::times)
      .def_readonly("states", &DiffusionTrajectory::states)
      .def_property_readonly("tau", &DiffusionTrajectory::tau);
  mod.def(
      "evolve",
      [](const FiniteSpace& s, const EntropyModel& model, const Field& rho0, double t, int n) {
        return evolve(s, model, density(s, rho0), t, n);
      },
      py::arg("space"), py::arg("model"), py::arg("rho0"), py::arg("t"), py::arg("n"));
  mod.def(
      "l1_contraction_check",
      [](const FiniteSpace& s, const EntropyModel& model, const Field& a, const Field& b, double t, int n) {
        return l1_contraction_check(s, model, density(s, a), density(s, b), t, n);
      },
      py::arg("space"), py::arg("model"), py::arg("rho1"), py::arg("rho2"), py::arg("t"), py::arg("n"));
  mod.def("dual_action_decay_check", &dual_action_decay_check, py::arg("trajectory"), py::arg("w0"),
          py::arg("Lambda"), py::arg("tol") = -1.0);

  py::class_<LinearizedTrajectory>(mod, "LinearizedTrajectory")
      .def_readonly("times", &LinearizedTrajectory::times)
      .def_readonly("fields", &LinearizedTrajectory::fields);
  mod.def(
      "backward_solve", [](const DiffusionTrajectory& tr, const Field& phiT) { return backward_solve(tr, phiT); },
      py::arg("trajectory"), py::arg("phi_T"));
  mod.def("forward_linearized_solve", &forward_linearized_solve, py::arg("trajectory"), py::arg("w0"));
  mod.def("pairing_check", &pairing_check, py::arg("space"), py::arg("forward"), py::arg("backward"));

  py::class_<W2Result>(mod, "W2Result")
      .def_readonly("distance", &W2Result::distance)
      .def_property_readonly("plan", [](const W2Result& r) { return r.coupling.plan; })
      .def_property_readonly("cost", [](const W2Result& r) { return r.coupling.cost; });
  mod.def(
      "w2_distance",
      [](const FiniteSpace& s, const Field& a, const Field& b) { return w2_distance(s, density(s, a), density(s, b)); },
      py::arg("space"), py::arg("mu0"), py::arg("mu1"));
  mod.def(
      "wasserstein2",
      [](const FiniteSpace& s, const Field& a, const Field& b) { return wasserstein2(s, density(s, a), density(s, b)); },
      py::arg("space"), py::arg("mu0"), py::arg("mu1"));

  py::class_<MeasureCurve>(mod, "MeasureCurve")
      .def_readonly("times", &MeasureCurve::times)
      .def_readonly("densities", &MeasureCurve::densities)
      .def_readonly("velocity2", &MeasureCurve::velocity2);
  mod.def(
      "geodesic_1d",
      [](const FiniteSpace& s, const Field& a, const Field& b, int J) {
        return curve_velocity(geodesic_1d(s, density(s, a), density(s, b), J));
      },
      py::arg("space"), py::arg("rho0"), py::arg("rho1"), py::arg("J"));
  mod.def("time_reversal_residual", &time_reversal_residual, py::arg("curve"), py::arg("model"));
  mod.def("cdstar_convexity_check", &cdstar_convexity_check, py::arg("curve"), py::arg("K"), py::arg("N"),
          py::arg("sigma_form") = false, py::arg("tol") = -1.0);
  mod.def(
      "evi_check",
      [](const FiniteSpace& s, const EntropyModel& model, const Field& rho, const Field& nu, double K, double T, int n,
         int J) { return evi_check(s, model, density(s, rho), density(s, nu), K, T, n, J); },
      py::arg("space"), py::arg("model"), py::arg("rho"), py::arg("nu"), py::arg("K"), py::arg("T"), py::arg("n"),
      py::arg("J") = 16);
  mod.def(
      "contraction_check",
      [](const FiniteSpace& s, const EntropyModel& model, const Field& rho, const Field& sigma, double K, double T,
         int n) { return contraction_check(s, model, density(s, rho), density(s, sigma), K, T, n); },
      py::arg("space"), py::arg("model"), py::arg("rho"), py::arg("sigma"), py::arg("K"), py::arg("T"),
      py::arg("n"));

  py::class_<FlowSystem>(mod, "FlowSystem")
      .def_readonly("name", &FlowSystem::name)
      .def_readonly("dim", &FlowSystem::dim)
      .def("field", [](const FlowSystem& s, const Vec& x) { return s.field(x); })
      .def_property_readonly("potential_mode", &FlowSystem::potential_mode);
  mod.def("system_names", &system_names);
  mod.def("system_by_name", &system_by_name, py::arg("name"), py::arg("dim") = 2);
  mod.def("linear_system", &linear_system, py::arg("A"));

  py::class_<OdeTrajectory>(mod, "OdeTrajectory")
      .def_readonly("times", &OdeTrajectory::times)
      .def_readonly("x", &OdeTrajectory::x)
      .def_readonly("w", &OdeTrajectory::w)
      .def_readonly("phi", &OdeTrajectory::phi)
      .def_readonly("pairing", &OdeTrajectory::pairing);
  mod.def("integrate_system", &integrate_system, py::arg("system"), py::arg("x0"), py::arg("w0"), py::arg("phi_T"),
          py::arg("T"), py::arg("n"));

  py::class_<CostResult>(mod, "CostResult")
      .def_readonly("cost", &CostResult::cost)
      .def_readonly("iterations", &CostResult::iterations)
      .def_readonly("gradient_norm", &CostResult::gradient_norm)
      .def_readonly("path", &CostResult::path);
  mod.def("collocation_cost", &collocation_cost, py::arg("system"), py::arg("x0"), py::arg("x1"), py::arg("M") = 64);
  mod.def("hamiltonian_monotonicity_check", &hamiltonian_monotonicity_check, py::arg("system"), py::arg("samples"),
          py::arg("tol") = 1e-12);
  mod.def("cost_contraction_check", &cost_contraction_check, py::arg("system"), py::arg("x0"), py::arg("x1"),
          py::arg("T"), py::arg("n"), py::arg("tol") = 1e-8, py::arg("M") = 64);

  mod.def(
      "run_scenario",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> output, int threads) {
        Scenario sc = load_scenario(config);
        if (output) sc.output = *output;
        py::gil_scoped_release release;
        return run_scenario(sc, threads).reports;
      },
      py::arg("config"), py::arg("output") = py::none(), py::arg("threads") = 1);
  mod.def("reports_to_json", &reports_to_json, py::arg("reports"));
}
