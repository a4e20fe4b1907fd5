#include "vaislab/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace vaislab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Context {
  const ExperimentConfig& config;
  fs::path out;
  std::ostream& log;
  RunResult& result;

  void write(const std::string& name, const std::string& content) {
    fs::create_directories(out);
    const fs::path p = out / name;
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << content;
    result.artifacts.push_back(p.string());
  }

  void write_json(const std::string& name, json body) {
    body["config"] = resolved_json(config);
    body["config_hash"] = config_hash(config);
    write(name, body.dump(2) + "\n");
  }
};

json record_json(const ResidualRecord& r) {
  return {{"check", r.check}, {"grid", r.grid}, {"value", r.value}, {"tolerance", r.tolerance}, {"pass", r.pass}};
}

ResidualRecord make_record(std::string check, std::string grid, double value, double tol) {
  return {std::move(check), std::move(grid), value, tol, std::isfinite(value) && value <= tol};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void require_curve(const ExperimentConfig& c, const std::string& command) {
  if (c.base.dimension != 1) throw ConfigError(command + ": only curve bases (dimension 1) are supported");
}

void require_k_list(const ExperimentConfig& c, const std::string& command) {
  if (c.k_list.empty()) throw ConfigError(command + ": k_list must be a non-empty array");
}

// Orbifold studies use powers divisible by every stabilizer order.
void require_admissible_k(const ExperimentConfig& c, const std::string& command) {
  if (c.base.kind != "weighted-line") return;
  const int l = std::lcm(c.base.weights[0], c.base.weights[1]);
  for (int k : c.k_list) {
    if (k % l != 0) throw ConfigError(command + ": k = " + std::to_string(k) + " is not a multiple of " + std::to_string(l));
  }
}

// Residual suite shared by verify and deform.
std::vector<ResidualRecord> structure_residuals(const VaismanStructure& s, const ExperimentConfig& c, bool gauduchon) {
  const Tolerances& t = c.tolerances;
  const std::string grid = s.grid_label(c.grid);
  std::vector<ResidualRecord> out;
  const auto id = vaisman_identity_residual(s, c.grid);
  out.push_back(make_record("vaisman-identity", grid, id.value, t.identity));
  out.push_back(make_record("lee-norm-variance", grid, id.lee_norm_variance, t.lee_norm_variance));
  if (gauduchon && c.base.dimension == 1) {
    out.push_back(make_record("gauduchon", grid, gauduchon_residual(s, c.grid), t.gauduchon));
  }
  for (auto& r : automorphy_residuals(s, c.grid, t.automorphy)) out.push_back(std::move(r));
  return out;
}

bool all_pass(const std::vector<ResidualRecord>& rs) {
  return std::all_of(rs.begin(), rs.end(), [](const ResidualRecord& r) { return r.pass; });
}

json records_json(const std::vector<ResidualRecord>& rs) {
  json a = json::array();
  for (const auto& r : rs) a.push_back(record_json(r));
  return a;
}

void log_records(std::ostream& log, const std::string& title, const std::vector<ResidualRecord>& rs) {
  log << title << "\n";
  for (const auto& r : rs) {
    log << "  " << (r.pass ? "pass " : "FAIL ") << r.check << " = " << r.value << " (tol " << r.tolerance << ")\n";
  }
}

BasicFunction make_basic_function(const BasicFunctionConfig& f, const ExperimentConfig& c) {
  if (f.kind == "constant") {
    const double a = f.amplitude;
    return {"constant " + fmt(a), [a](const Point&) { return a; }};
  }
  if (c.base.kind != "projective") throw ConfigError("deform.type_II: re-ratio requires a projective base");
  if (f.i > c.base.dimension || f.j > c.base.dimension) throw ConfigError("deform.type_II: index exceeds the dimension");
  const double a = f.amplitude;
  const int i = f.i, j = f.j;
  return {"re-ratio", [a, i, j](const Point& z) { return a * std::real(z(i) * std::conj(z(j))) / z.squaredNorm(); }};
}

// ---------------------------------------------------------------------------

bool run_bergman(Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  require_k_list(c, "bergman");
  const HermitianBundle bundle = c.make_bundle();
  const QuadratureRule rule = make_quadrature(bundle, c.quadrature.radial, c.quadrature.angular);
  std::optional<QuadratureRule> alt;
  if (c.resolution_check) alt = make_quadrature(bundle, c.quadrature.radial + 16, c.quadrature.angular + 32);
  const auto grid = base_grid(bundle.atlas(), c.grid);

  std::ostringstream csv;
  csv << "k,N_k,B_min,B_max,B_mean,integral,normalization_error,resolution_error,pass\n";
  json rows = json::array();
  bool pass = true;
  for (int k : c.k_list) {
    const SectionBasis basis = make_section_basis(bundle, k, rule);
    const double res = alt ? check_quadrature_resolution(bundle, basis.exponents, k, rule, *alt, c.tolerances.resolution)
                           : 0.0;
    double lo = INFINITY, hi = 0, sum = 0;
    for (const auto& g : grid) {
      const double b = bergman_kernel(bundle, basis, g.chart, g.coords);
      lo = std::min(lo, b);
      hi = std::max(hi, b);
      sum += b;
    }
    double integral = 0;
    for (const auto& n : rule.nodes) integral += n.volume_weight * bergman_kernel(bundle, basis, n.chart, n.w);
    const double expected = basis.size();
    const double err = std::abs(integral - expected) / expected;
    const bool ok = err <= c.tolerances.normalization && res <= c.tolerances.resolution;
    pass = pass && ok;
    const double mean = sum / static_cast<double>(grid.size());
    csv << k << ',' << basis.size() - 1 << ',' << fmt(lo) << ',' << fmt(hi) << ',' << fmt(mean) << ',' << fmt(integral)
        << ',' << fmt(err) << ',' << fmt(res) << ',' << (ok ? "true" : "false") << '\n';
    rows.push_back({{"k", k}, {"N_k", basis.size() - 1}, {"B_min", lo}, {"B_max", hi}, {"B_mean", mean},
                    {"integral", integral}, {"normalization_error", err}, {"resolution_error", res}, {"pass", ok}});
    ctx.log << "k=" << k << " N=" << basis.size() - 1 << " B in [" << lo << ", " << hi << "] normalization error " << err
            << "\n";
    if (c.export_gram) {
      std::ostringstream g;
      write_gram_csv(g, basis.gram);
      ctx.write("gram_k" + std::to_string(k) + ".csv", g.str());
    }
  }
  ctx.write("bergman.csv", csv.str());
  ctx.write_json("bergman.json", {{"command", "bergman"},
                                  {"bundle", bundle.describe()},
                                  {"volume", rule.volume()},
                                  {"quadrature", rule.scheme},
                                  {"rows", rows},
                                  {"pass", pass}});
  return pass;
}

bool run_verify(Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  const HermitianBundle bundle = c.make_bundle();
  const VaismanStructure s = vaisman_from_cone(bundle, c.contraction, c.grid);
  auto records = structure_residuals(s, c, true);
  const std::string grid = s.grid_label(c.grid);
  const auto tc = transverse_form_check(s, c.grid);
  records.push_back(make_record("transverse-form-match", grid, tc.max_rel_dev, c.tolerances.transverse));
  records.push_back(make_record("lee-in-kernel", grid, tc.lee_in_kernel, c.tolerances.transverse));
  records.push_back(make_record("lee-closed", grid, lee_closedness_residual(s, c.grid), c.tolerances.closedness));
  records.push_back(
      make_record("transverse-closed", grid, transverse_closedness_residual(s, c.grid), c.tolerances.closedness));
  log_records(ctx.log, "verify " + s.name(), records);
  const bool pass = all_pass(records);
  ctx.write_json("verify.json", {{"command", "verify"},
                                 {"structure", s.name()},
                                 {"transverse_constant", tc.constant},
                                 {"residuals", records_json(records)},
                                 {"pass", pass}});
  return pass;
}

bool run_deform(Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  const HermitianBundle bundle = c.make_bundle();
  const VaismanStructure s = vaisman_from_cone(bundle, c.contraction, c.grid);
  const std::string grid = s.grid_label(c.grid);
  json reports = json::array();
  bool pass = true;
  auto add = [&](const std::string& kind, json params, const std::vector<ResidualRecord>& after) {
    log_records(ctx.log, kind + " " + params.dump(), after);
    pass = pass && all_pass(after);
    reports.push_back({{"deformation", kind}, {"parameters", std::move(params)}, {"after", records_json(after)}});
  };

  const auto before = structure_residuals(s, c, true);
  log_records(ctx.log, "reference", before);
  pass = all_pass(before);

  for (double a : c.deform.sigma) {
    const VaismanStructure sa = sigma_homothety(s, a);
    auto rs = structure_residuals(sa, c, true);
    rs.push_back(make_record("sigma-roundtrip", grid, field_distance(sigma_homothety(sa, 1 / a), s, c.grid),
                             c.tolerances.type_II));
    add("sigma", {{"a", a}, {"q", sa.q()}}, rs);
  }
  if (c.deform.type_I_a) {
    const double a = *c.deform.type_I_a;
    const VaismanStructure s1 = type_I_deformation(s, a, {}, c.grid);
    // explicit-mode fields: the Gauduchon check would need third-order nested differences
    add("type_I", {{"a", a}, {"alpha", "zero"}, {"q", s1.q()}}, structure_residuals(s1, c, false));
  }
  if (c.deform.type_II) {
    const BasicFunction f = make_basic_function(*c.deform.type_II, c);
    const VaismanStructure s2 = type_II_deformation(s, f, c.grid);
    auto rs = structure_residuals(s2, c, true);
    const auto rep = verify_type_II(s, s2, f, c.grid, c.quadrature.radial, c.quadrature.angular);
    rs.push_back(make_record("type-II-lee-relation", grid, rep.lee_relation, c.tolerances.type_II));
    rs.push_back(make_record("type-II-kaehler-class", grid, rep.class_relative, c.tolerances.type_II));
    add("type_II",
        {{"f", f.name}, {"amplitude", c.deform.type_II->amplitude}, {"volume_before", rep.volume_before},
         {"volume_after", rep.volume_after}},
        rs);
  }
  ctx.write_json("deform.json", {{"command", "deform"},
                                 {"structure", s.name()},
                                 {"before", records_json(before)},
                                 {"deformations", reports},
                                 {"pass", pass}});
  return pass;
}

KodairaMapData kodaira_data(const HermitianBundle& bundle, int k, const QuadratureRule& rule) {
  return bundle.atlas().is_orbifold() ? weighted_kodaira_map(bundle, k, rule) : make_kodaira_data(bundle, k, rule);
}

bool run_embed(Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  require_curve(c, "embed");
  const HermitianBundle bundle = c.make_bundle();
  const QuadratureRule rule = make_quadrature(bundle, c.quadrature.radial, c.quadrature.angular);
  const KodairaMapData data = kodaira_data(bundle, c.embed.k, rule);
  const EmbeddingReport rep = certify_embedding(data, c.contraction, c.grid, c.embed.samples, c.seed);
  const TargetHopf target = extend_contraction(data, c.contraction);
  const Tolerances& t = c.tolerances;
  const bool pass = rep.injective && rep.immersive && rep.pullback_identity_residual <= t.pullback &&
                    rep.equivariance_residual <= t.equivariance && rep.commuting_square_residual <= t.equivariance;
  json gamma = json::array();
  for (Eigen::Index j = 0; j < target.gamma.size(); ++j) gamma.push_back({target.gamma(j).real(), target.gamma(j).imag()});
  ctx.log << "embed k=" << rep.k << " N=" << rep.N << " injective=" << rep.injective << " immersive=" << rep.immersive
          << " pullback=" << rep.pullback_identity_residual << " equivariance=" << rep.equivariance_residual << "\n";
  ctx.write_json("embed.json", {{"command", "embed"},
                                {"k", rep.k},
                                {"N_k", rep.N},
                                {"weights", rep.weights},
                                {"injective", rep.injective},
                                {"immersive", rep.immersive},
                                {"min_separation", rep.min_separation},
                                {"min_immersion", rep.min_immersion},
                                {"pullback_identity_residual", rep.pullback_identity_residual},
                                {"equivariance_residual", rep.equivariance_residual},
                                {"commuting_square_residual", rep.commuting_square_residual},
                                {"target", {{"gamma", gamma},
                                            {"q", target.q},
                                            {"exponents", target.exponents},
                                            {"regular", target.regular},
                                            {"quasi_regular", target.quasi_regular}}},
                                {"pass", pass}});
  return pass;
}

bool run_converge(Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  require_curve(c, "converge");
  require_k_list(c, "converge");
  require_admissible_k(c, "converge");
  const HermitianBundle bundle = c.make_bundle();
  const ConvergenceReport rep =
      convergence_study(bundle, c.k_list, c.m_max, c.criteria, c.study_options(), c.experiment);
  for (const auto& row : rep.rows) {
    ctx.log << "k=" << row.k << " N=" << row.N;
    for (int m = 0; m <= c.m_max; ++m) ctx.log << " D" << m << "=" << row.D[static_cast<std::size_t>(m)];
    ctx.log << " (" << row.seconds << " s)" << (row.error.empty() ? "" : " aborted: " + row.error) << "\n";
  }
  std::ostringstream csv;
  rep.write_csv(csv);
  ctx.write("converge.csv", csv.str());

  json rows = json::array();
  for (const auto& row : rep.rows) {
    json d = json::array();
    for (int m = 0; m < 3; ++m) d.push_back(m <= c.m_max ? json(row.D[static_cast<std::size_t>(m)]) : json(nullptr));
    rows.push_back({{"k", row.k}, {"N_k", row.N}, {"D", d}, {"error", row.error}});
  }
  ctx.write_json("converge.json", {{"command", "converge"},
                                   {"experiment", rep.experiment},
                                   {"bundle", rep.bundle},
                                   {"m_max", rep.m_max},
                                   {"rows", rows},
                                   {"slope", rep.slope},
                                   {"decreasing", rep.decreasing},
                                   {"thresholds", "derived expectation"},
                                   {"failures", rep.failures},
                                   {"pass", rep.pass}});
  for (const auto& f : rep.failures) ctx.log << "  " << f << "\n";
  for (const auto& row : rep.rows) {
    if (!row.error.empty()) throw NumericalError("quadrature-resolution", "k = " + std::to_string(row.k) + ": " + row.error);
  }
  return rep.pass;
}

bool run_lee(Context& ctx) {
  const ExperimentConfig& c = ctx.config;
  if (c.lee.coords.empty()) throw ConfigError("lee-approx: lee.coords must be a non-empty array");
  LeeClassCoords coords{c.lee.coords, static_cast<int>(c.lee.coords.size())};
  const auto seq = rational_lee_approximation(coords, c.lee.tol, c.lee.max_denominator);
  std::ostringstream csv;
  csv << "step,denominator,numerators,a,alpha,error\n";
  json rows = json::array();
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto& s = seq[i];
    std::string nums, alpha;
    for (std::size_t j = 0; j < s.numerators.size(); ++j) nums += (j ? ";" : "") + std::to_string(s.numerators[j]);
    for (std::size_t j = 0; j < s.alpha.size(); ++j) alpha += (j ? ";" : "") + fmt(s.alpha[j]);
    csv << i << ',' << s.denominator << ',' << nums << ',' << fmt(s.a) << ',' << alpha << ',' << fmt(s.error) << '\n';
    rows.push_back({{"step", i}, {"denominator", s.denominator}, {"numerators", s.numerators}, {"a", s.a},
                    {"alpha", s.alpha}, {"error", s.error}});
    ctx.log << "Q=" << s.denominator << " P=" << nums << " error " << s.error << "\n";
  }
  const bool pass = !seq.empty() && seq.back().error <= c.lee.tol;
  ctx.write("lee.csv", csv.str());
  ctx.write_json("lee.json", {{"command", "lee-approx"}, {"sequence", rows}, {"pass", pass}});
  return pass;
}

}  // namespace

const std::vector<std::string>& runner_commands() {
  static const std::vector<std::string> cmds{"bergman", "verify", "deform", "embed", "converge", "lee-approx"};
  return cmds;
}

RunResult run_command(const std::string& command, ExperimentConfig config, const RunOptions& options,
                      std::ostream& log) {
  RunResult result;
  if (options.out_dir) config.output_dir = *options.out_dir;
  if (options.seed) config.seed = *options.seed;
  set_default_jobs(options.jobs);
  Context ctx{config, fs::path(config.output_dir), log, result};
  try {
    bool pass = false;
    if (command == "bergman") {
      pass = run_bergman(ctx);
    } else if (command == "verify") {
      pass = run_verify(ctx);
    } else if (command == "deform") {
      pass = run_deform(ctx);
    } else if (command == "embed") {
      pass = run_embed(ctx);
    } else if (command == "converge") {
      pass = run_converge(ctx);
    } else if (command == "lee-approx") {
      pass = run_lee(ctx);
    } else {
      throw ConfigError("unknown command '" + command + "'");
    }
    result.exit_code = pass ? kExitPass : kExitFail;
    result.message = pass ? "pass" : "some tolerances failed";
  } catch (const ConfigError& e) {
    result.exit_code = kExitConfig;
    result.message = std::string("config error: ") + e.what();
  } catch (const std::invalid_argument& e) {
    result.exit_code = kExitConfig;
    result.message = std::string("config error: ") + e.what();
  } catch (const NumericalError& e) {
    result.exit_code = kExitNumerical;
    result.message = std::string("numerical error: ") + e.what();
  }
  return result;
}

RunResult run_command_file(const std::string& command, const std::string& config_path, const RunOptions& options,
                           std::ostream& log) {
  ExperimentConfig config;
  try {
    config = load_config(config_path);
  } catch (const ConfigError& e) {
    RunResult r;
    r.exit_code = kExitConfig;
    r.message = std::string("config error: ") + e.what();
    return r;
  }
  return run_command(command, std::move(config), options, log);
}

}  // namespace vaislab
