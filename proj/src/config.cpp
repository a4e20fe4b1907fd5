#include "vaislab/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace vaislab {

using nlohmann::json;

namespace {

// Reads the members of one JSON object, remembering which keys were consumed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  // Rejects keys that were never read.
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) fail(at(key), "unknown key");
    }
  }

  const json* get(const std::string& key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  void number(const std::string& key, double& out) {
    if (const json* v = get(key)) {
      if (!v->is_number()) fail(at(key), "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) fail(at(key), "expected a finite number");
    }
  }

  void positive(const std::string& key, double& out) {
    number(key, out);
    if (has(key) && !(out > 0)) fail(at(key), "must be positive");
  }

  template <class Int>
  void integer(const std::string& key, Int& out, long long lo, long long hi) {
    if (const json* v = get(key)) {
      if (!v->is_number_integer()) fail(at(key), "expected an integer");
      const long long x = v->get<long long>();
      if (x < lo || x > hi) fail(at(key), "out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      out = static_cast<Int>(x);
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) fail(at(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out, const std::set<std::string>& allowed = {}) {
    if (const json* v = get(key)) {
      if (!v->is_string()) fail(at(key), "expected a string");
      out = v->get<std::string>();
      if (!allowed.empty() && !allowed.count(out)) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        fail(at(key), "must be one of: " + list);
      }
    }
  }

  std::vector<double> numbers(const std::string& key) {
    std::vector<double> out;
    if (const json* v = get(key)) {
      if (!v->is_array()) fail(at(key), "expected an array of numbers");
      for (const auto& e : *v) {
        if (!e.is_number()) fail(at(key), "expected an array of numbers");
        out.push_back(e.get<double>());
      }
    }
    return out;
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void parse_base(const json& j, BaseConfig& b) {
  ObjectReader r(j, "base");
  r.string("kind", b.kind, {"projective", "weighted-line"});
  r.integer("dimension", b.dimension, 1, 3);
  if (const json* w = r.get("weights")) {
    if (!w->is_array() || w->size() != 2 || !(*w)[0].is_number_integer() || !(*w)[1].is_number_integer()) {
      ObjectReader::fail("base.weights", "expected two integers");
    }
    b.weights = {(*w)[0].get<int>(), (*w)[1].get<int>()};
    if (b.weights[0] < 1 || b.weights[1] < 1 || std::gcd(b.weights[0], b.weights[1]) != 1) {
      ObjectReader::fail("base.weights", "weights must be coprime positive integers");
    }
  }
  if (b.kind == "weighted-line" && b.dimension != 1) ObjectReader::fail("base.dimension", "weighted lines have dimension 1");
  if (b.kind == "projective" && r.has("weights")) ObjectReader::fail("base.weights", "only for weighted-line bases");
  r.finish();
}

void parse_grid(const json& j, GridSpec& g) {
  ObjectReader r(j, "grid");
  r.integer("radial", g.radial, 2, 4096);
  r.integer("angular", g.angular, 2, 4096);
  r.integer("residual_radial", g.residual_radial, 1, 1024);
  r.integer("residual_angular", g.residual_angular, 1, 1024);
  r.integer("fiber_radial", g.fiber_radial, 1, 64);
  r.integer("fiber_angular", g.fiber_angular, 1, 64);
  r.number("exclusion_radius", g.exclusion_radius);
  if (g.exclusion_radius < 0 || g.exclusion_radius >= 1) ObjectReader::fail("grid.exclusion_radius", "must lie in [0, 1)");
  r.finish();
}

void parse_tolerances(const json& j, Tolerances& t) {
  ObjectReader r(j, "tolerances");
  r.positive("identity", t.identity);
  r.positive("lee_norm_variance", t.lee_norm_variance);
  r.positive("gauduchon", t.gauduchon);
  r.positive("automorphy", t.automorphy);
  r.positive("transverse", t.transverse);
  r.positive("closedness", t.closedness);
  r.positive("normalization", t.normalization);
  r.positive("resolution", t.resolution);
  r.positive("pullback", t.pullback);
  r.positive("equivariance", t.equivariance);
  r.positive("type_II", t.type_II);
  r.finish();
}

void parse_criteria(const json& j, ConvergenceCriteria& c) {
  ObjectReader r(j, "criteria");
  if (const json* s = r.get("slope_max")) {
    if (!s->is_array() || s->size() != 3) ObjectReader::fail("criteria.slope_max", "expected three numbers or nulls");
    for (std::size_t m = 0; m < 3; ++m) {
      const json& e = (*s)[m];
      if (e.is_null()) {
        c.slope_max[m].reset();
      } else if (e.is_number()) {
        c.slope_max[m] = e.get<double>();
      } else {
        ObjectReader::fail("criteria.slope_max", "expected three numbers or nulls");
      }
    }
  }
  if (const json* s = r.get("strictly_decreasing")) {
    if (!s->is_array() || s->size() != 3) ObjectReader::fail("criteria.strictly_decreasing", "expected three booleans");
    for (std::size_t m = 0; m < 3; ++m) {
      if (!(*s)[m].is_boolean()) ObjectReader::fail("criteria.strictly_decreasing", "expected three booleans");
      c.strictly_decreasing[m] = (*s)[m].get<bool>();
    }
  }
  r.integer("monotone_from", c.monotone_from, 1, 1000000);
  if (const json* w = r.get("window")) {
    if (!w->is_array() || w->size() != 2 || !(*w)[0].is_number_integer() || !(*w)[1].is_number_integer()) {
      ObjectReader::fail("criteria.window", "expected two integers");
    }
    c.window_lo = (*w)[0].get<int>();
    c.window_hi = (*w)[1].get<int>();
    if (c.window_lo < 1 || c.window_hi < c.window_lo) ObjectReader::fail("criteria.window", "expected 1 <= lo <= hi");
  }
  r.finish();
}

void parse_deform(const json& j, DeformConfig& d) {
  ObjectReader r(j, "deform");
  if (r.has("sigma")) {
    d.sigma = r.numbers("sigma");
    for (double a : d.sigma) {
      if (!(a > 0)) ObjectReader::fail("deform.sigma", "homothety exponents must be positive");
    }
  }
  if (const json* t = r.get("type_I")) {
    if (t->is_null()) {
      d.type_I_a.reset();
    } else {
      ObjectReader tr(*t, "deform.type_I");
      double a = *d.type_I_a;
      tr.positive("a", a);
      tr.finish();
      d.type_I_a = a;
    }
  }
  if (const json* t = r.get("type_II")) {
    if (t->is_null()) {
      d.type_II.reset();
    } else {
      BasicFunctionConfig f;
      ObjectReader tr(*t, "deform.type_II");
      tr.string("kind", f.kind, {"re-ratio", "constant"});
      tr.number("amplitude", f.amplitude);
      tr.integer("i", f.i, 0, 3);
      tr.integer("j", f.j, 0, 3);
      tr.finish();
      d.type_II = f;
    }
  }
  r.finish();
}

}  // namespace

HermitianBundle ExperimentConfig::make_bundle() const {
  ChartAtlas atlas = base.kind == "weighted-line" ? ChartAtlas::weighted_line(base.weights[0], base.weights[1])
                                                  : ChartAtlas::projective(base.dimension);
  return HermitianBundle(std::move(atlas), bundle.epsilon, bundle.log_scale,
                         bundle.perturbation == "radial" ? Perturbation::Radial : Perturbation::Mixed);
}

StudyOptions ExperimentConfig::study_options() const {
  StudyOptions o;
  o.radial = quadrature.radial;
  o.angular = quadrature.angular;
  o.resolution_check = resolution_check;
  o.resolution_tol = tolerances.resolution;
  o.grid = grid;
  return o;
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  ObjectReader r(j, "");
  r.string("experiment", c.experiment);
  if (const json* b = r.get("base")) parse_base(*b, c.base);
  if (const json* b = r.get("bundle")) {
    ObjectReader br(*b, "bundle");
    br.number("epsilon", c.bundle.epsilon);
    br.number("log_scale", c.bundle.log_scale);
    br.string("perturbation", c.bundle.perturbation, {"mixed", "radial"});
    br.finish();
  }
  if (const json* g = r.get("contraction")) {
    ObjectReader cr(*g, "contraction");
    cr.number("q", c.contraction.q);
    c.contraction.phase_turns = cr.numbers("phases");
    cr.finish();
  }
  const int coords = c.base.kind == "weighted-line" ? 2 : c.base.dimension + 1;
  try {
    c.contraction.validate(coords);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("contraction: ") + e.what());
  }
  if (const json* g = r.get("grid")) parse_grid(*g, c.grid);
  if (const json* q = r.get("quadrature")) {
    ObjectReader qr(*q, "quadrature");
    qr.integer("radial", c.quadrature.radial, 4, 4096);
    qr.integer("angular", c.quadrature.angular, 4, 4096);
    qr.finish();
  }
  if (const json* k = r.get("k_list")) {
    if (!k->is_array() || k->empty()) ObjectReader::fail("k_list", "expected a non-empty array of integers");
    for (const auto& e : *k) {
      if (!e.is_number_integer() || e.get<long long>() < 1 || e.get<long long>() > 1000) {
        ObjectReader::fail("k_list", "entries must be integers in [1, 1000]");
      }
      const int v = e.get<int>();
      if (!c.k_list.empty() && v <= c.k_list.back()) ObjectReader::fail("k_list", "must be strictly increasing");
      c.k_list.push_back(v);
    }
  }
  r.integer("m_max", c.m_max, 0, 2);
  if (const json* t = r.get("tolerances")) parse_tolerances(*t, c.tolerances);
  if (const json* t = r.get("criteria")) parse_criteria(*t, c.criteria);
  r.boolean("resolution_check", c.resolution_check);
  if (const json* d = r.get("deform")) parse_deform(*d, c.deform);
  if (const json* e = r.get("embed")) {
    ObjectReader er(*e, "embed");
    er.integer("k", c.embed.k, 1, 1000);
    er.integer("samples", c.embed.samples, 1, 100000);
    er.finish();
  }
  if (const json* l = r.get("lee")) {
    ObjectReader lr(*l, "lee");
    c.lee.coords = lr.numbers("coords");
    lr.positive("tol", c.lee.tol);
    lr.integer("max_denominator", c.lee.max_denominator, 1, 1000000000000LL);
    lr.finish();
  }
  r.boolean("export_gram", c.export_gram);
  if (const json* o = r.get("output")) {
    ObjectReader orr(*o, "output");
    orr.string("dir", c.output_dir);
    orr.finish();
  }
  r.integer("seed", c.seed, 0, std::numeric_limits<long long>::max());
  r.finish();
  return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

json resolved_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["base"] = {{"kind", c.base.kind}, {"dimension", c.base.dimension}};
  if (c.base.kind == "weighted-line") j["base"]["weights"] = c.base.weights;
  j["bundle"] = {{"epsilon", c.bundle.epsilon}, {"log_scale", c.bundle.log_scale},
                 {"perturbation", c.bundle.perturbation}};
  j["contraction"] = {{"q", c.contraction.q}, {"phases", c.contraction.phase_turns}};
  const GridSpec& g = c.grid;
  j["grid"] = {{"radial", g.radial},
               {"angular", g.angular},
               {"residual_radial", g.residual_radial},
               {"residual_angular", g.residual_angular},
               {"fiber_radial", g.fiber_radial},
               {"fiber_angular", g.fiber_angular},
               {"exclusion_radius", g.exclusion_radius}};
  j["quadrature"] = {{"radial", c.quadrature.radial}, {"angular", c.quadrature.angular}};
  if (!c.k_list.empty()) j["k_list"] = c.k_list;
  j["m_max"] = c.m_max;
  const Tolerances& t = c.tolerances;
  j["tolerances"] = {{"identity", t.identity},
                     {"lee_norm_variance", t.lee_norm_variance},
                     {"gauduchon", t.gauduchon},
                     {"automorphy", t.automorphy},
                     {"transverse", t.transverse},
                     {"closedness", t.closedness},
                     {"normalization", t.normalization},
                     {"resolution", t.resolution},
                     {"pullback", t.pullback},
                     {"equivariance", t.equivariance},
                     {"type_II", t.type_II}};
  json slope = json::array();
  for (const auto& s : c.criteria.slope_max) slope.push_back(s ? json(*s) : json(nullptr));
  j["criteria"] = {{"slope_max", slope},
                   {"strictly_decreasing", c.criteria.strictly_decreasing},
                   {"monotone_from", c.criteria.monotone_from},
                   {"window", {c.criteria.window_lo, c.criteria.window_hi}}};
  j["resolution_check"] = c.resolution_check;
  json deform;
  deform["sigma"] = c.deform.sigma;
  deform["type_I"] = c.deform.type_I_a ? json{{"a", *c.deform.type_I_a}} : json(nullptr);
  if (c.deform.type_II) {
    const auto& f = *c.deform.type_II;
    deform["type_II"] = {{"kind", f.kind}, {"amplitude", f.amplitude}, {"i", f.i}, {"j", f.j}};
  } else {
    deform["type_II"] = nullptr;
  }
  j["deform"] = deform;
  j["embed"] = {{"k", c.embed.k}, {"samples", c.embed.samples}};
  j["lee"] = {{"coords", c.lee.coords}, {"tol", c.lee.tol}, {"max_denominator", c.lee.max_denominator}};
  j["export_gram"] = c.export_gram;
  j["output"] = {{"dir", c.output_dir}};
  j["seed"] = c.seed;
  return j;
}

std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : resolved_json(c).dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace vaislab
