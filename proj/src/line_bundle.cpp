#include "vaislab/line_bundle.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <type_traits>

namespace vaislab {

namespace {

// log F for the weighted cone potential: the root s of
//   sum_j n2_j exp(-a_j s) = 1,
// with F = exp(s). Unit weights have the closed form log(sum n2_j).
double solve_log_cone(const std::vector<double>& n2, const std::vector<int>& a) {
  bool unit = std::all_of(a.begin(), a.end(), [](int x) { return x == 1; });
  double total = 0;
  for (double v : n2) total += v;
  if (total <= 0) throw std::invalid_argument("cone potential: zero vector");
  if (unit) return std::log(total);
  // g(s) is convex and decreasing, and g(s_lo) >= 0, so Newton from s_lo
  // increases monotonically to the root.
  double s = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n2.size(); ++j) {
    if (n2[j] > 0) s = std::max(s, std::log(n2[j]) / a[j]);
  }
  for (int it = 0; it < 100; ++it) {
    double g = -1, gp = 0;
    for (std::size_t j = 0; j < n2.size(); ++j) {
      if (n2[j] == 0) continue;
      const double t = n2[j] * std::exp(-a[j] * s);
      g += t;
      gp -= a[j] * t;
    }
    const double step = g / gp;
    s -= step;
    if (std::abs(step) <= 1e-15 * (1 + std::abs(s))) break;
  }
  return s;
}

template <class S>
S log_cone(const std::vector<Cx<S>>& z, const std::vector<int>& a) {
  using std::exp;
  using std::log;
  std::vector<S> n2;
  std::vector<double> n2v;
  for (const auto& zj : z) {
    n2.push_back(cnorm2(zj));
    n2v.push_back(value_of(n2.back()));
  }
  const bool unit = std::all_of(a.begin(), a.end(), [](int x) { return x == 1; });
  if (unit) {
    S total(0.0);
    for (const auto& v : n2) total = total + v;
    return log(total);
  }
  const double s0 = solve_log_cone(n2v, a);
  if constexpr (std::is_same_v<S, double>) {
    return s0;
  } else {
    // Newton in jet arithmetic from the converged value: each step fixes one
    // more derivative order.
    S s(s0);
    for (int it = 0; it < 3; ++it) {
      S g(-1.0), gp(0.0);
      for (std::size_t j = 0; j < n2.size(); ++j) {
        const S t = n2[j] * exp(S(-static_cast<double>(a[j])) * s);
        g = g + t;
        gp = gp - S(static_cast<double>(a[j])) * t;
      }
      s = s - g / gp;
    }
    return s;
  }
}

template <class S>
S perturbation_of(const std::vector<Cx<S>>& z, const std::vector<int>& wts, const S& log_f, Perturbation kind) {
  const int a = wts[0], b = wts[1];
  using std::exp;
  const S inv_a = exp(S(-static_cast<double>(a)) * log_f);
  const S inv_b = exp(S(-static_cast<double>(b)) * log_f);
  S u = S(0.3) * (cnorm2(z[0]) * inv_a - cnorm2(z[1]) * inv_b);
  if (kind == Perturbation::Mixed) {
    const Cx<S> cross = cmul(cpow(z[0], b), cconj(cpow(z[1], a)));
    u = u + cross.re * exp(S(-static_cast<double>(a * b)) * log_f);
  }
  return u;
}

template <class S>
S log_t2_generic(const std::vector<Cx<S>>& z, const std::vector<int>& wts, double eps, double log_scale,
                 Perturbation kind) {
  const S lf = log_cone(z, wts);
  S out = lf - S(log_scale);
  if (eps != 0.0) out = out + S(eps) * perturbation_of(z, wts, lf, kind);
  return out;
}

std::vector<Cx<double>> to_cx(const Point& z) {
  std::vector<Cx<double>> out;
  for (int i = 0; i < z.size(); ++i) out.push_back({z(i).real(), z(i).imag()});
  return out;
}

}  // namespace

HermitianBundle::HermitianBundle(ChartAtlas atlas, double epsilon, double log_scale, Perturbation kind)
    : atlas_(std::move(atlas)), epsilon_(epsilon), log_scale_(log_scale), kind_(kind) {
  if (!std::isfinite(epsilon) || !std::isfinite(log_scale)) {
    throw std::invalid_argument("HermitianBundle: non-finite parameters");
  }
}

double HermitianBundle::log_t2(const Point& z) const {
  return log_t2_generic(to_cx(z), atlas_.weights(), epsilon_, log_scale_, kind_);
}

double HermitianBundle::perturbation(const Point& z) const {
  const auto zc = to_cx(z);
  return perturbation_of(zc, atlas_.weights(), log_cone(zc, atlas_.weights()), kind_);
}

double HermitianBundle::psi(int chart, const Point& w) const { return log_t2(atlas_.lift(chart, w, 1.0)); }

double HermitianBundle::psi(int chart, cplx w) const {
  Point p(1);
  p << w;
  return psi(chart, p);
}

Jet2 HermitianBundle::psi_jet(int chart, cplx w) const {
  if (atlas_.dimension() != 1) throw std::invalid_argument("psi_jet: one-dimensional bases only");
  std::vector<Cx<Jet2>> z(2);
  z[static_cast<std::size_t>(chart)] = {Jet2(1.0), Jet2(0.0)};
  z[static_cast<std::size_t>(1 - chart)] = {Jet2::var_x(w.real()), Jet2::var_y(w.imag())};
  return log_t2_generic(z, atlas_.weights(), epsilon_, log_scale_, kind_);
}

double HermitianBundle::volume_density(int chart, cplx w) const { return 0.25 * psi_jet(chart, w).laplacian(); }

ScalarField HermitianBundle::potential(int chart) const {
  ScalarField f;
  f.name = "psi_" + std::to_string(chart);
  f.dim = atlas_.dimension();
  f.eval = [this, chart](const Point& w) { return psi(chart, w); };
  f.margin = atlas_.chart_margin();
  return f;
}

void HermitianBundle::check_positive(std::span<const GridPoint> grid) const {
  for (const auto& g : grid) {
    double lam;
    if (atlas_.dimension() == 1) {
      lam = volume_density(g.chart, g.coords(0));
    } else {
      lam = ddbar_potential(potential(g.chart), g.coords).min_eigenvalue();
    }
    if (!(lam > 0)) {
      std::ostringstream os;
      os << "curvature eigenvalue " << lam << " at chart " << g.chart << ", |w| = " << g.coords.norm();
      throw NumericalError("bundle-not-positive", os.str());
    }
  }
}

std::string HermitianBundle::describe() const {
  std::ostringstream os;
  os << "L -> " << atlas_.describe() << " (eps=" << epsilon_ << (kind_ == Perturbation::Radial ? " radial" : "")
     << ", log_scale=" << log_scale_ << ")";
  return os.str();
}

std::vector<TwoFormField> curvature_form(const HermitianBundle& bundle, const FdSteps& steps) {
  std::vector<TwoFormField> out;
  const auto& atlas = bundle.atlas();
  for (int c = 0; c < atlas.num_charts(); ++c) {
    TwoFormField f;
    f.name = "omega_X";
    f.dim = atlas.dimension();
    f.margin = atlas.chart_margin();
    if (atlas.dimension() == 1) {
      f.eval = [&bundle, c](const Point& w) {
        Eigen::MatrixXcd h(1, 1);
        h(0, 0) = bundle.volume_density(c, w(0));
        return TwoFormValue::from_hermitian(h);
      };
    } else {
      f.eval = [&bundle, c, steps](const Point& w) { return ddbar_potential(bundle.potential(c), w, steps); };
    }
    out.push_back(std::move(f));
  }
  return out;
}

// ---------------------------------------------------------------------------

void gauss_legendre_unit(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw std::invalid_argument("gauss_legendre_unit: n must be positive");
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2 / ((1 - x * x) * dp * dp);
    const auto lo = static_cast<std::size_t>(i), hi = static_cast<std::size_t>(n - 1 - i);
    nodes[lo] = 0.5 * (1 - x);
    nodes[hi] = 0.5 * (1 + x);
    weights[lo] = weights[hi] = 0.5 * w;
  }
}

double QuadratureRule::volume() const {
  double v = 0;
  for (const auto& n : nodes) v += n.volume_weight;
  return v;
}

QuadratureRule make_quadrature(const HermitianBundle& bundle, int radial, int angular) {
  const auto& atlas = bundle.atlas();
  if (atlas.dimension() != 1) {
    throw std::invalid_argument("make_quadrature: one-dimensional bases only");
  }
  if (radial < 2 || angular < 2) throw std::invalid_argument("make_quadrature: too few nodes");
  std::vector<double> x, wx;
  gauss_legendre_unit(radial, x, wx);
  const double wt = 2 * kPi / angular;

  QuadratureRule rule;
  rule.radial = radial;
  rule.angular = angular;
  rule.max_exact_power = std::min(2 * radial - 1, angular - 1);
  if (atlas.is_cp1()) {
    rule.scheme = "chart0-u-substitution";
    for (int i = 0; i < radial; ++i) {
      const double u = x[static_cast<std::size_t>(i)];
      const double r = std::sqrt(u / (1 - u));
      const double area_r = wx[static_cast<std::size_t>(i)] / (2 * (1 - u) * (1 - u));
      for (int j = 0; j < angular; ++j) {
        QuadratureNode nd;
        nd.chart = 0;
        nd.w = std::polar(r, 2 * kPi * j / angular);
        nd.area_weight = area_r * wt;
        nd.volume_weight = nd.area_weight * bundle.volume_density(0, nd.w);
        rule.nodes.push_back(nd);
      }
    }
  } else {
    rule.scheme = "split-unit-discs";
    for (int chart = 0; chart < 2; ++chart) {
      const double inv_order = 1.0 / atlas.stabilizer_order(chart);
      for (int i = 0; i < radial; ++i) {
        const double r = std::sqrt(x[static_cast<std::size_t>(i)]);
        const double area_r = 0.5 * wx[static_cast<std::size_t>(i)] * inv_order;
        for (int j = 0; j < angular; ++j) {
          QuadratureNode nd;
          nd.chart = chart;
          nd.w = std::polar(r, 2 * kPi * j / angular);
          nd.area_weight = area_r * wt;
          nd.volume_weight = nd.area_weight * bundle.volume_density(chart, nd.w);
          rule.nodes.push_back(nd);
        }
      }
    }
  }
  return rule;
}

// ---------------------------------------------------------------------------

std::vector<Exponent> section_basis(const ChartAtlas& atlas, int k) {
  if (k < 0) throw std::invalid_argument("section_basis: k must be non-negative");
  std::vector<Exponent> out;
  const int n = atlas.dimension();
  if (atlas.kind() == BaseKind::WeightedLine) {
    const int a = atlas.weights()[0], b = atlas.weights()[1];
    for (int i = k / a; i >= 0; --i) {
      const int rest = k - a * i;
      if (rest % b == 0) out.push_back({i, rest / b});
    }
    return out;
  }
  Exponent e(static_cast<std::size_t>(n + 1), 0);
  // descending lexicographic enumeration of compositions of k
  auto rec = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == n) {
      e[static_cast<std::size_t>(pos)] = remaining;
      out.push_back(e);
      return;
    }
    for (int v = remaining; v >= 0; --v) {
      e[static_cast<std::size_t>(pos)] = v;
      self(self, pos + 1, remaining - v);
    }
  };
  rec(rec, 0, k);
  return out;
}

Eigen::VectorXcd monomials(const ChartAtlas& atlas, const std::vector<Exponent>& exps, int chart, const Point& w) {
  Eigen::VectorXcd out(static_cast<Eigen::Index>(exps.size()));
  for (std::size_t p = 0; p < exps.size(); ++p) {
    cplx v = 1.0;
    int k = 0;
    for (int i = 0; i <= atlas.dimension(); ++i) {
      if (i == chart) continue;
      v *= std::pow(w(k++), exps[p][static_cast<std::size_t>(i)]);
    }
    out(static_cast<Eigen::Index>(p)) = v;
  }
  return out;
}

Eigen::VectorXcd scaled_sections(const HermitianBundle& bundle, const std::vector<Exponent>& exps, int k,
                                 int chart, const Point& w) {
  const int n = bundle.atlas().dimension();
  const double half_weight = -0.5 * k * bundle.psi(chart, w);
  Eigen::VectorXcd out(static_cast<Eigen::Index>(exps.size()));
  for (std::size_t p = 0; p < exps.size(); ++p) {
    double log_mod = half_weight, arg = 0;
    bool zero = false;
    int kk = 0;
    for (int i = 0; i <= n; ++i) {
      if (i == chart) continue;
      const int e = exps[p][static_cast<std::size_t>(i)];
      const cplx wi = w(kk++);
      if (e == 0) continue;
      if (std::abs(wi) == 0.0) {
        zero = true;
        break;
      }
      log_mod += e * std::log(std::abs(wi));
      arg += e * std::arg(wi);
    }
    out(static_cast<Eigen::Index>(p)) = zero ? cplx(0.0) : std::polar(std::exp(log_mod), arg);
  }
  return out;
}

Eigen::MatrixXcd gram_matrix(const HermitianBundle& bundle, const std::vector<Exponent>& exps, int k,
                             const QuadratureRule& rule) {
  if (exps.empty()) throw NumericalError("empty-section-space", "no monomial sections");
  const auto np = static_cast<Eigen::Index>(rule.nodes.size());
  const auto ns = static_cast<Eigen::Index>(exps.size());
  Eigen::MatrixXcd s(np, ns);
  Eigen::VectorXd wts(np);
  for (Eigen::Index i = 0; i < np; ++i) {
    const auto& nd = rule.nodes[static_cast<std::size_t>(i)];
    Point w(1);
    w << nd.w;
    s.row(i) = scaled_sections(bundle, exps, k, nd.chart, w).transpose();
    wts(i) = nd.volume_weight;
  }
  Eigen::MatrixXcd g = s.adjoint() * wts.asDiagonal() * s;
  g = 0.5 * (g + g.adjoint()).eval();
  if (!g.allFinite()) throw NumericalError("gram-not-finite", "non-finite Gram entries");
  return g;
}

Eigen::MatrixXcd orthonormalize(const Eigen::MatrixXcd& gram) {
  Eigen::LLT<Eigen::MatrixXcd> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("gram-not-positive-definite", "Cholesky factorization failed");
  }
  const Eigen::MatrixXcd l = llt.matrixL();
  const auto n = gram.rows();
  return l.adjoint().triangularView<Eigen::Upper>().solve(Eigen::MatrixXcd::Identity(n, n));
}

double check_quadrature_resolution(const HermitianBundle& bundle, const std::vector<Exponent>& exps, int k,
                                   const QuadratureRule& rule, const QuadratureRule& alt, double tol) {
  const Eigen::MatrixXcd g1 = gram_matrix(bundle, exps, k, rule);
  const Eigen::MatrixXcd g2 = gram_matrix(bundle, exps, k, alt);
  double worst = 0;
  for (Eigen::Index p = 0; p < g1.rows(); ++p) {
    for (Eigen::Index q = 0; q < g1.cols(); ++q) {
      const double scale = std::sqrt(g1(p, p).real() * g1(q, q).real());
      worst = std::max(worst, std::abs(g1(p, q) - g2(p, q)) / scale);
    }
  }
  if (!(worst <= tol)) {
    std::ostringstream os;
    os << "Gram matrices at k=" << k << " differ by " << worst << " between " << rule.radial << "x"
       << rule.angular << " and " << alt.radial << "x" << alt.angular << " nodes";
    throw NumericalError("quadrature-under-resolved", os.str());
  }
  return worst;
}

SectionBasis make_section_basis(const HermitianBundle& bundle, int k, const QuadratureRule& rule) {
  SectionBasis sb;
  sb.k = k;
  sb.exponents = section_basis(bundle.atlas(), k);
  if (sb.exponents.empty()) {
    throw NumericalError("empty-section-space", "H^0(X, L^" + std::to_string(k) + ") has no monomials");
  }
  sb.gram = gram_matrix(bundle, sb.exponents, k, rule);
  sb.coeffs = orthonormalize(sb.gram);
  return sb;
}

double bergman_kernel(const HermitianBundle& bundle, const SectionBasis& basis, int chart, const Point& w,
                      bool uniformizing_cover, double exclusion) {
  const auto& atlas = bundle.atlas();
  if (chart < 0 || chart >= atlas.num_charts()) throw std::invalid_argument("bergman_kernel: bad chart");
  if (!uniformizing_cover && atlas.stabilizer_order(chart) > 1 && w.norm() < exclusion) {
    throw NumericalError("orbifold-neighborhood", "point lies in an excluded orbifold-point neighbourhood");
  }
  const Eigen::VectorXcd s = scaled_sections(bundle, basis.exponents, basis.k, chart, w);
  return (basis.coeffs.transpose() * s).squaredNorm();
}

double bergman_kernel(const HermitianBundle& bundle, const SectionBasis& basis, int chart, cplx w) {
  Point p(1);
  p << w;
  return bergman_kernel(bundle, basis, chart, p);
}

void write_gram_csv(std::ostream& os, const Eigen::MatrixXcd& gram) {
  os << std::setprecision(17);
  for (Eigen::Index p = 0; p < gram.rows(); ++p) {
    for (Eigen::Index q = 0; q < gram.cols(); ++q) {
      if (q) os << ',';
      os << gram(p, q).real() << ',' << gram(p, q).imag();
    }
    os << '\n';
  }
}

}  // namespace vaislab
