// Python bindings. Basic functions are built in C++ (no Python callbacks),
// so worker threads never need the GIL.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "vaislab/runner.hpp"

namespace py = pybind11;
using namespace vaislab;

namespace {

py::dict residual_dict(const ResidualRecord& r) {
  py::dict d;
  d["check"] = r.check;
  d["grid"] = r.grid;
  d["value"] = r.value;
  d["tolerance"] = r.tolerance;
  d["pass"] = r.pass;
  return d;
}

BasicFunction re_ratio(double amplitude, int i, int j) {
  return {"re-ratio", [=](const Point& z) { return amplitude * std::real(z(i) * std::conj(z(j))) / z.squaredNorm(); }};
}

GridSpec grid_spec(int radial, int angular, int residual_radial, int residual_angular, double exclusion) {
  GridSpec g;
  g.radial = radial;
  g.angular = angular;
  g.residual_radial = residual_radial;
  g.residual_angular = residual_angular;
  g.exclusion_radius = exclusion;
  return g;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Vaisman structures, Bergman kernels, Hopf embeddings and convergence studies";

  // messages start with the failing check, e.g. "base-point: ..."
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("set_jobs", &set_default_jobs, py::arg("jobs"));

  py::class_<GridSpec>(m, "GridSpec")
      .def(py::init(&grid_spec), py::arg("radial") = 41, py::arg("angular") = 64, py::arg("residual_radial") = 9,
           py::arg("residual_angular") = 12, py::arg("exclusion_radius") = 0.05)
      .def_readwrite("radial", &GridSpec::radial)
      .def_readwrite("angular", &GridSpec::angular)
      .def_readwrite("residual_radial", &GridSpec::residual_radial)
      .def_readwrite("residual_angular", &GridSpec::residual_angular)
      .def_readwrite("exclusion_radius", &GridSpec::exclusion_radius);

  // geometry and bundles
  py::class_<ChartAtlas>(m, "ChartAtlas")
      .def_static("projective", &ChartAtlas::projective, py::arg("n"))
      .def_static("weighted_line", &ChartAtlas::weighted_line, py::arg("a"), py::arg("b"))
      .def_property_readonly("dimension", &ChartAtlas::dimension)
      .def_property_readonly("weights", &ChartAtlas::weights)
      .def_property_readonly("is_orbifold", &ChartAtlas::is_orbifold)
      .def("transition", &ChartAtlas::transition)
      .def("__repr__", &ChartAtlas::describe);
  m.def("projective_distance", &projective_distance);

  py::enum_<Perturbation>(m, "Perturbation").value("Mixed", Perturbation::Mixed).value("Radial", Perturbation::Radial);

  py::class_<HermitianBundle>(m, "HermitianBundle")
      .def(py::init<ChartAtlas, double, double, Perturbation>(), py::arg("atlas"), py::arg("epsilon") = 0.0,
           py::arg("log_scale") = 0.0, py::arg("perturbation") = Perturbation::Mixed)
      .def_property_readonly("atlas", &HermitianBundle::atlas)
      .def_property_readonly("epsilon", &HermitianBundle::epsilon)
      .def("psi", py::overload_cast<int, cplx>(&HermitianBundle::psi, py::const_))
      .def("__repr__", &HermitianBundle::describe);

  py::class_<QuadratureRule>(m, "QuadratureRule")
      .def_property_readonly("volume", &QuadratureRule::volume)
      .def_property_readonly("size", [](const QuadratureRule& r) { return r.nodes.size(); })
      .def_readonly("scheme", &QuadratureRule::scheme);
  m.def("make_quadrature", &make_quadrature, py::arg("bundle"), py::arg("radial") = 64, py::arg("angular") = 128);

  m.def("section_basis", &section_basis, py::arg("atlas"), py::arg("k"));
  m.def("gram_matrix", &gram_matrix, py::arg("bundle"), py::arg("exponents"), py::arg("k"), py::arg("rule"));
  m.def("orthonormalize", &orthonormalize);

  py::class_<SectionBasis>(m, "SectionBasis")
      .def_readonly("k", &SectionBasis::k)
      .def_readonly("exponents", &SectionBasis::exponents)
      .def_readonly("gram", &SectionBasis::gram)
      .def_readonly("coeffs", &SectionBasis::coeffs)
      .def("__len__", &SectionBasis::size);
  m.def("make_section_basis", &make_section_basis, py::arg("bundle"), py::arg("k"), py::arg("rule"));
  m.def("bergman_kernel", py::overload_cast<const HermitianBundle&, const SectionBasis&, int, cplx>(&bergman_kernel),
        py::arg("bundle"), py::arg("basis"), py::arg("chart"), py::arg("w"));

  // Vaisman structures
  py::class_<ContractionSpec>(m, "ContractionSpec")
      .def(py::init([](double q, std::vector<double> phases) { return ContractionSpec{q, std::move(phases)}; }),
           py::arg("q") = 0.5, py::arg("phases") = std::vector<double>{})
      .def_readwrite("q", &ContractionSpec::q)
      .def_readwrite("phases", &ContractionSpec::phase_turns);

  py::class_<VaismanStructure>(m, "VaismanStructure")
      .def_static("from_bundle", &VaismanStructure::from_bundle, py::arg("bundle"), py::arg("contraction"))
      .def_property_readonly("name", &VaismanStructure::name)
      .def_property_readonly("q", &VaismanStructure::q)
      .def("log_t2", &VaismanStructure::log_t2, py::arg("chart"), py::arg("p"));
  m.def("vaisman_from_cone", &vaisman_from_cone, py::arg("bundle"), py::arg("contraction"),
        py::arg("grid") = GridSpec{});
  m.def(
      "vaisman_identity_residual",
      [](const VaismanStructure& s, const GridSpec& g) {
        const auto r = vaisman_identity_residual(s, g);
        py::dict d;
        d["value"] = r.value;
        d["lee_norm_mean"] = r.lee_norm_mean;
        d["lee_norm_variance"] = r.lee_norm_variance;
        return d;
      },
      py::arg("structure"), py::arg("grid") = GridSpec{});
  m.def("gauduchon_residual", &gauduchon_residual, py::arg("structure"), py::arg("grid") = GridSpec{});
  m.def(
      "automorphy_residuals",
      [](const VaismanStructure& s, const GridSpec& g, double tol) {
        py::list out;
        for (const auto& r : automorphy_residuals(s, g, tol)) out.append(residual_dict(r));
        return out;
      },
      py::arg("structure"), py::arg("grid") = GridSpec{}, py::arg("tol") = 1e-8);
  m.def("sigma_homothety", &sigma_homothety, py::arg("structure"), py::arg("a"));
  m.def(
      "type_I_deformation",
      [](const VaismanStructure& s, double a, const GridSpec& g) { return type_I_deformation(s, a, {}, g); },
      py::arg("structure"), py::arg("a"), py::arg("grid") = GridSpec{});
  m.def(
      "type_II_deformation",
      [](const VaismanStructure& s, double amplitude, int i, int j, const GridSpec& g) {
        return type_II_deformation(s, re_ratio(amplitude, i, j), g);
      },
      py::arg("structure"), py::arg("amplitude"), py::arg("i") = 1, py::arg("j") = 0, py::arg("grid") = GridSpec{},
      "t -> exp(f) t with f = amplitude * Re(z_i conj z_j) / |z|^2");
  m.def("field_distance", &field_distance, py::arg("s1"), py::arg("s2"), py::arg("grid") = GridSpec{});
  m.def("convergents", &convergents, py::arg("x"), py::arg("max_denominator"));
  m.def(
      "rational_lee_approximation",
      [](const std::vector<double>& coords, double tol, long long max_den) {
        py::list out;
        for (const auto& a : rational_lee_approximation({coords, static_cast<int>(coords.size())}, tol, max_den)) {
          py::dict d;
          d["numerators"] = a.numerators;
          d["denominator"] = a.denominator;
          d["a"] = a.a;
          d["alpha"] = a.alpha;
          d["error"] = a.error;
          out.append(d);
        }
        return out;
      },
      py::arg("coords"), py::arg("tol"), py::arg("max_denominator") = 1000000);

  // embeddings
  py::class_<KodairaMapData>(m, "KodairaMapData")
      .def_readonly("k", &KodairaMapData::k)
      .def_readonly("N", &KodairaMapData::N)
      .def_readonly("weights", &KodairaMapData::weights)
      .def_readonly("basis", &KodairaMapData::basis);
  m.def("make_kodaira_data", &make_kodaira_data, py::arg("bundle"), py::arg("k"), py::arg("rule"));
  m.def("weighted_kodaira_map", &weighted_kodaira_map, py::arg("bundle"), py::arg("k"), py::arg("rule"));
  m.def("kodaira_map", py::overload_cast<const KodairaMapData&, int, cplx>(&kodaira_map), py::arg("data"),
        py::arg("chart"), py::arg("w"));
  m.def("cone_immersion", &cone_immersion, py::arg("data"), py::arg("z"));
  m.def(
      "extend_contraction",
      [](const KodairaMapData& d, const ContractionSpec& c) {
        const auto t = extend_contraction(d, c);
        py::dict out;
        out["gamma"] = Eigen::VectorXcd(t.gamma);
        out["q"] = t.q;
        out["exponents"] = t.exponents;
        out["regular"] = t.regular;
        out["quasi_regular"] = t.quasi_regular;
        return out;
      },
      py::arg("data"), py::arg("contraction"));
  m.def(
      "certify_embedding",
      [](const KodairaMapData& d, const ContractionSpec& c, const GridSpec& g, int samples, unsigned long long seed) {
        const auto r = certify_embedding(d, c, g, samples, seed);
        py::dict out;
        out["k"] = r.k;
        out["N_k"] = r.N;
        out["weights"] = r.weights;
        out["injective"] = r.injective;
        out["immersive"] = r.immersive;
        out["min_separation"] = r.min_separation;
        out["min_immersion"] = r.min_immersion;
        out["pullback_identity_residual"] = r.pullback_identity_residual;
        out["equivariance_residual"] = r.equivariance_residual;
        out["commuting_square_residual"] = r.commuting_square_residual;
        return out;
      },
      py::arg("data"), py::arg("contraction"), py::arg("grid") = GridSpec{}, py::arg("samples") = 100,
      py::arg("seed") = 1);

  // convergence
  m.def(
      "cm_distances",
      [](const KodairaMapData& d, const GridSpec& g, int m_max) { return cm_distances(d, g, m_max); },
      py::arg("data"), py::arg("grid") = GridSpec{}, py::arg("m_max") = 2);
  m.def(
      "convergence_study",
      [](const HermitianBundle& b, const std::vector<int>& ks, int m_max, std::vector<std::optional<double>> slope_max,
         std::vector<bool> decreasing, int window_lo, int window_hi, const GridSpec& g) {
        ConvergenceCriteria cr;
        for (std::size_t i = 0; i < 3 && i < slope_max.size(); ++i) cr.slope_max[i] = slope_max[i];
        for (std::size_t i = 0; i < 3 && i < decreasing.size(); ++i) cr.strictly_decreasing[i] = decreasing[i];
        cr.window_lo = window_lo;
        cr.window_hi = window_hi;
        cr.monotone_from = window_lo;
        StudyOptions opt;
        opt.grid = g;
        const auto r = convergence_study(b, ks, m_max, cr, opt);
        py::list rows;
        for (const auto& row : r.rows) {
          py::dict d;
          d["k"] = row.k;
          d["N_k"] = row.N;
          d["D"] = row.D;
          d["error"] = row.error;
          rows.append(d);
        }
        std::ostringstream csv;
        r.write_csv(csv);
        py::dict out;
        out["rows"] = rows;
        out["slope"] = r.slope;
        out["decreasing"] = r.decreasing;
        out["pass"] = r.pass;
        out["failures"] = r.failures;
        out["csv"] = csv.str();
        return out;
      },
      py::arg("bundle"), py::arg("k_list"), py::arg("m_max") = 2,
      py::arg("slope_max") = std::vector<std::optional<double>>{}, py::arg("strictly_decreasing") = std::vector<bool>{},
      py::arg("window_lo") = 5, py::arg("window_hi") = 40, py::arg("grid") = GridSpec{});

  // orchestration
  m.def(
      "run",
      [](const std::string& command, const std::string& config_json, const std::string& out_dir, int jobs) {
        RunOptions o;
        o.out_dir = out_dir;
        o.jobs = jobs;
        std::ostringstream log;
        // config errors surface as exit code 2, like the command-line tool
        RunResult r;
        try {
          r = run_command(command, parse_config_text(config_json), o, log);
        } catch (const ConfigError& e) {
          r.exit_code = kExitConfig;
          r.message = std::string("config error: ") + e.what();
        }
        py::dict out;
        out["exit_code"] = r.exit_code;
        out["message"] = r.message;
        out["artifacts"] = r.artifacts;
        out["log"] = log.str();
        return out;
      },
      py::arg("command"), py::arg("config_json"), py::arg("out_dir"), py::arg("jobs") = 1,
      "Runs one experiment command; returns exit_code (0 pass, 1 fail, 2 config, 3 numerical).");
  m.attr("commands") = runner_commands();
}
