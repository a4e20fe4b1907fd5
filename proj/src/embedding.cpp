#include "vaislab/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace vaislab {

namespace {

cplx int_pow(cplx x, int e) {
  cplx r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

// prod_i z_i^{e_i} for every exponent
Eigen::VectorXcd homogeneous_monomials(const std::vector<Exponent>& exps, const Point& z) {
  Eigen::VectorXcd m(static_cast<Eigen::Index>(exps.size()));
  for (std::size_t p = 0; p < exps.size(); ++p) {
    cplx v = 1.0;
    for (std::size_t i = 0; i < exps[p].size(); ++i) v *= int_pow(z(static_cast<Eigen::Index>(i)), exps[p][i]);
    m(static_cast<Eigen::Index>(p)) = v;
  }
  return m;
}

Point point1(cplx w) {
  Point p(1);
  p << w;
  return p;
}

bool is_rational(double x, double tol) {
  for (const auto& [p, q] : convergents(x, 1000)) {
    if (std::abs(x - static_cast<double>(p) / static_cast<double>(q)) <= tol) return true;
  }
  return false;
}

}  // namespace

KodairaMapData make_kodaira_data(const HermitianBundle& bundle, int k, const QuadratureRule& rule) {
  if (k < 1) throw std::invalid_argument("Kodaira map: k must be positive");
  const auto& atlas = bundle.atlas();
  KodairaMapData d{bundle, make_section_basis(bundle, k, rule), k, 0, {}};
  d.N = d.basis.size() - 1;
  d.weights.assign(static_cast<std::size_t>(d.basis.size()), atlas.is_orbifold() ? k : 1);
  if (atlas.is_orbifold()) {
    // the only candidate base points are the coordinate points [1:0] and [0:1]
    for (int c = 0; c < atlas.num_charts(); ++c) kodaira_map(d, c, Point::Zero(atlas.dimension()));
  }
  return d;
}

KodairaMapData weighted_kodaira_map(const HermitianBundle& bundle, int k, const QuadratureRule& rule) {
  return make_kodaira_data(bundle, k, rule);
}

Eigen::VectorXcd kodaira_map(const KodairaMapData& data, int chart, const Point& w) {
  const Eigen::VectorXcd v =
      data.basis.coeffs.transpose() * monomials(data.bundle.atlas(), data.basis.exponents, chart, w);
  if (v.cwiseAbs().maxCoeff() == 0.0) {
    std::ostringstream os;
    os << "all sections of L^" << data.k << " vanish at chart " << chart << ", w = (";
    for (Eigen::Index i = 0; i < w.size(); ++i) os << (i ? ", " : "") << w(i);
    os << ")";
    throw NumericalError("base-point", os.str());
  }
  return v;
}

Eigen::VectorXcd kodaira_map(const KodairaMapData& data, int chart, cplx w) { return kodaira_map(data, chart, point1(w)); }

Eigen::VectorXcd cone_immersion(const KodairaMapData& data, const Point& z) {
  if (z.cwiseAbs().maxCoeff() == 0.0) throw NumericalError("zero-fiber-vector", "phi_k is undefined at 0");
  return data.basis.coeffs.transpose() * homogeneous_monomials(data.basis.exponents, z);
}

Eigen::VectorXcd kodaira_derivative(const KodairaMapData& data, int chart, cplx w) {
  if (data.bundle.atlas().dimension() != 1) throw std::invalid_argument("kodaira_derivative: curves only");
  const int other = 1 - chart;
  const auto& exps = data.basis.exponents;
  Eigen::VectorXcd dm(static_cast<Eigen::Index>(exps.size()));
  for (std::size_t p = 0; p < exps.size(); ++p) {
    const int e = exps[p][static_cast<std::size_t>(other)];
    dm(static_cast<Eigen::Index>(p)) = e == 0 ? cplx(0) : static_cast<double>(e) * int_pow(w, e - 1);
  }
  return data.basis.coeffs.transpose() * dm;
}

PullbackCheck fs_pullback_norm(const KodairaMapData& data, int chart, const Point& w, cplx c) {
  if (std::abs(c) == 0.0) throw NumericalError("zero-fiber-vector", "v = 0");
  const Point z = data.bundle.atlas().lift(chart, w, c);
  PullbackCheck out;
  out.flat = cone_immersion(data, z).squaredNorm();
  out.bergman = bergman_kernel(data.bundle, data.basis, chart, w) * std::exp(data.k * data.bundle.log_t2(z));
  out.relative = std::abs(out.flat - out.bergman) / out.bergman;
  return out;
}

PullbackCheck induced_cone_coordinate(const KodairaMapData& data, int chart, const Point& w, cplx c) {
  PullbackCheck out;
  const double t = cone_coordinate(data.bundle, chart, w, c);
  out.flat = cone_immersion(data, data.bundle.atlas().lift(chart, w, c)).squaredNorm();
  out.bergman = bergman_kernel(data.bundle, data.basis, chart, w) * std::pow(t, 2 * data.k);
  out.relative = std::abs(out.flat - out.bergman) / out.bergman;
  return out;
}

// ---------------------------------------------------------------------------

TargetHopf TargetHopf::from_eigenvalues(const Eigen::VectorXcd& gamma) {
  TargetHopf t;
  t.dim = static_cast<int>(gamma.size());
  t.gamma = gamma;
  if (t.dim < 1) throw std::invalid_argument("target Hopf manifold: empty contraction");
  for (Eigen::Index j = 0; j < gamma.size(); ++j) {
    const double r = std::abs(gamma(j));
    if (!(r > 0 && r < 1)) {
      std::ostringstream os;
      os << "|Gamma_" << j << "| = " << r;
      throw NumericalError("not-a-contraction", os.str());
    }
    t.q = std::max(t.q, r);
  }
  t.regular = true;
  t.quasi_regular = true;
  for (Eigen::Index j = 0; j < gamma.size(); ++j) {
    const double r = std::log(std::abs(gamma(j))) / std::log(t.q);
    t.exponents.push_back(r);
    if (std::abs(gamma(j) - gamma(0)) > 1e-14 * std::abs(gamma(0))) t.regular = false;
    if (!is_rational(r, 1e-10)) t.quasi_regular = false;
  }
  return t;
}

TargetHopf extend_contraction(const KodairaMapData& data, const ContractionSpec& contraction) {
  const auto& atlas = data.bundle.atlas();
  contraction.validate(atlas.num_charts());
  const Eigen::VectorXcd dz = contraction.homogeneous_diagonal(atlas.weights());
  const Eigen::VectorXcd delta = homogeneous_monomials(data.basis.exponents, dz);
  const auto& C = data.basis.coeffs;
  const double cmax = C.cwiseAbs().maxCoeff();
  for (Eigen::Index p = 0; p < C.rows(); ++p) {
    for (Eigen::Index j = 0; j < C.cols(); ++j) {
      if (std::abs(C(p, j)) > 1e-12 * cmax && std::abs(delta(p) - delta(j)) > 1e-12 * std::abs(delta(j))) {
        std::ostringstream os;
        os << "orthonormal section " << j << " mixes monomials with gamma-characters " << delta(p) << " and "
           << delta(j);
        throw NumericalError("contraction-not-extendable", os.str());
      }
    }
  }
  return TargetHopf::from_eigenvalues(delta);
}

double target_log_potential(const TargetHopf& target, const Point& Z) {
  if (Z.size() != target.dim) throw std::invalid_argument("target potential: dimension mismatch");
  if (target.regular) {
    if (Z.cwiseAbs().maxCoeff() == 0.0) throw NumericalError("zero-fiber-vector", "target potential at 0");
    return std::log(Z.squaredNorm());
  }
  // g(s) = sum |Z_j|^2 exp(-r_j s) - 1 is convex and decreasing; Newton from the left
  double s = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < Z.size(); ++j) {
    const double a2 = std::norm(Z(j));
    if (a2 > 0) s = std::max(s, std::log(a2) / target.exponents[static_cast<std::size_t>(j)]);
  }
  if (!std::isfinite(s)) throw NumericalError("zero-fiber-vector", "target potential at 0");
  for (int it = 0; it < 200; ++it) {
    double g = -1, dg = 0;
    for (Eigen::Index j = 0; j < Z.size(); ++j) {
      const double r = target.exponents[static_cast<std::size_t>(j)];
      const double term = std::norm(Z(j)) * std::exp(-r * s);
      g += term;
      dg -= r * term;
    }
    const double step = g / dg;
    s -= step;
    if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(s))) break;
  }
  return s;
}

VaismanStructure target_structure(const TargetHopf& target) {
  std::ostringstream name;
  name << "target Hopf C^" << target.dim << (target.regular ? " (regular)" : "");
  return VaismanStructure::on_vector_space(
      target.dim, target.gamma, [target](const Point& Z) { return target_log_potential(target, Z); }, name.str());
}

// ---------------------------------------------------------------------------

std::vector<ConeSample> random_cone_samples(const ChartAtlas& atlas, int count, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ConeSample> out;
  for (int i = 0; i < count; ++i) {
    ConeSample s;
    s.chart = static_cast<int>(unit(rng) * atlas.num_charts()) % atlas.num_charts();
    s.w.resize(atlas.dimension());
    for (int j = 0; j < atlas.dimension(); ++j) s.w(j) = std::polar(1.5 * std::sqrt(unit(rng)), 2 * kPi * unit(rng));
    s.c = std::polar(0.5 + unit(rng), 2 * kPi * unit(rng));
    out.push_back(s);
  }
  return out;
}

double equivariance_residual(const KodairaMapData& data, const TargetHopf& target,
                             const ContractionSpec& contraction, const std::vector<ConeSample>& samples) {
  const auto& atlas = data.bundle.atlas();
  const Eigen::VectorXcd d = contraction.homogeneous_diagonal(atlas.weights());
  double worst = 0;
  for (const auto& s : samples) {
    const Point z = atlas.lift(s.chart, s.w, s.c);
    const Eigen::VectorXcd lhs = cone_immersion(data, d.cwiseProduct(z));
    const Eigen::VectorXcd rhs = target.gamma.cwiseProduct(cone_immersion(data, z));
    worst = std::max(worst, (lhs - rhs).norm() / rhs.norm());
  }
  return worst;
}

double commuting_square_residual(const KodairaMapData& data, const std::vector<ConeSample>& samples) {
  const auto& atlas = data.bundle.atlas();
  const auto& wts = atlas.weights();
  double worst = 0;
  for (const auto& s : samples) {
    const Point z = atlas.lift(s.chart, s.w, s.c);
    int best = 0;
    double best_size = -1;
    for (int c = 0; c < atlas.num_charts(); ++c) {
      const double size = std::pow(std::abs(z(c)), 1.0 / wts[static_cast<std::size_t>(c)]);
      if (size > best_size) {
        best_size = size;
        best = c;
      }
    }
    const auto loc = atlas.to_chart(best, z);
    if (!loc) throw NumericalError("chart", "point outside its largest chart");
    worst = std::max(worst, projective_distance(cone_immersion(data, z), kodaira_map(data, best, loc->first)));
  }
  return worst;
}

double pullback_identity_residual(const KodairaMapData& data, const std::vector<ConeSample>& samples) {
  double worst = 0;
  for (const auto& s : samples) worst = std::max(worst, fs_pullback_norm(data, s.chart, s.w, s.c).relative);
  return worst;
}

EmbeddingReport certify_embedding(const KodairaMapData& data, const ContractionSpec& contraction,
                                  const GridSpec& spec, int samples, unsigned long long seed) {
  const auto& atlas = data.bundle.atlas();
  EmbeddingReport rep;
  rep.k = data.k;
  rep.N = data.N;
  rep.weights = data.weights;

  const auto grid = base_grid(atlas, 21, 32, spec.exclusion_radius);
  std::vector<Point> homog(grid.size());
  std::vector<Eigen::VectorXcd> img(grid.size());
  std::vector<double> imm(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const auto& g = grid[i];
    homog[i] = atlas.lift(g.chart, g.coords, 1.0);
    const Eigen::VectorXcd v = kodaira_map(data, g.chart, g.coords);
    img[i] = v / v.norm();
    const Eigen::VectorXcd dv = kodaira_derivative(data, g.chart, g.coords(0));
    const Eigen::VectorXcd transverse = dv - (v.dot(dv) / v.squaredNorm()) * v;
    imm[i] = transverse.norm() / v.norm();
  });
  rep.min_immersion = *std::min_element(imm.begin(), imm.end());
  rep.immersive = rep.min_immersion > 1e-8;

  std::vector<double> sep(grid.size(), std::numeric_limits<double>::infinity());
  parallel_for(grid.size(), [&](std::size_t i) {
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      if (atlas.base_distance(homog[i], homog[j]) <= 1e-6) continue;
      sep[i] = std::min(sep[i], projective_distance(img[i], img[j]));
    }
  });
  rep.min_separation = *std::min_element(sep.begin(), sep.end());
  rep.injective = rep.min_separation > 1e-8;

  const auto pts = random_cone_samples(atlas, samples, seed);
  rep.pullback_identity_residual = pullback_identity_residual(data, pts);
  rep.commuting_square_residual = commuting_square_residual(data, pts);
  rep.equivariance_residual = equivariance_residual(data, extend_contraction(data, contraction), contraction, pts);
  return rep;
}

}  // namespace vaislab
