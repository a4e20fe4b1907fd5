#include "vaislab/geometry.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace vaislab {

namespace {

std::atomic<int> g_jobs{1};

bool all_finite(const Eigen::MatrixXcd& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m(i).real()) || !std::isfinite(m(i).imag())) return false;
  }
  return true;
}

}  // namespace

void set_default_jobs(int jobs) { g_jobs = std::max(1, jobs); }
int default_jobs() { return g_jobs; }

double fd_step(double rel, const Point& p) {
  double scale = 1.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) scale = std::max(scale, std::abs(p(i)));
  return rel * scale;
}

Point real_direction(int dim, int r) {
  Point e = Point::Zero(dim);
  e(r / 2) = (r % 2 == 0) ? cplx(1, 0) : cplx(0, 1);
  return e;
}

void require_margin(const std::function<double(const Point&)>& margin, const Point& p, double h) {
  if (!margin) return;
  const double m = margin(p);
  if (!(m >= 2 * h)) {
    std::ostringstream os;
    os << "margin " << m << " < 2 x step " << h;
    throw NumericalError("point-too-close-to-chart-boundary", os.str());
  }
}

// ---------------------------------------------------------------------------

OneFormValue OneFormValue::zero(int dim) {
  return {Eigen::VectorXcd::Zero(dim), Eigen::VectorXcd::Zero(dim)};
}

OneFormValue OneFormValue::real_from(const Eigen::VectorXcd& a) { return {a, a.conjugate()}; }

bool OneFormValue::is_real(double tol) const { return (dzbar - dz.conjugate()).cwiseAbs().maxCoeff() <= tol; }

double OneFormValue::max_abs() const {
  if (dz.size() == 0) return 0.0;
  return std::max(dz.cwiseAbs().maxCoeff(), dzbar.cwiseAbs().maxCoeff());
}

OneFormValue OneFormValue::operator+(const OneFormValue& o) const { return {dz + o.dz, dzbar + o.dzbar}; }
OneFormValue OneFormValue::operator-(const OneFormValue& o) const { return {dz - o.dz, dzbar - o.dzbar}; }
OneFormValue OneFormValue::operator*(double s) const { return {dz * s, dzbar * s}; }

TwoFormValue TwoFormValue::zero(int dim) {
  return {Eigen::MatrixXcd::Zero(dim, dim), Eigen::MatrixXcd::Zero(dim, dim), Eigen::MatrixXcd::Zero(dim, dim)};
}

TwoFormValue TwoFormValue::from_hermitian(const Eigen::MatrixXcd& h) {
  TwoFormValue v = zero(static_cast<int>(h.rows()));
  v.h11 = h;
  return v;
}

double TwoFormValue::max_abs() const {
  return std::max({p20.cwiseAbs().maxCoeff(), h11.cwiseAbs().maxCoeff(), p02.cwiseAbs().maxCoeff()});
}

double TwoFormValue::hermitian_residual() const { return (h11 - h11.adjoint()).cwiseAbs().maxCoeff(); }

double TwoFormValue::min_eigenvalue() const {
  const Eigen::MatrixXcd herm = 0.5 * (h11 + h11.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

TwoFormValue TwoFormValue::operator+(const TwoFormValue& o) const {
  return {p20 + o.p20, h11 + o.h11, p02 + o.p02};
}
TwoFormValue TwoFormValue::operator-(const TwoFormValue& o) const {
  return {p20 - o.p20, h11 - o.h11, p02 - o.p02};
}
TwoFormValue TwoFormValue::operator*(double s) const { return {p20 * s, h11 * s, p02 * s}; }

// ---------------------------------------------------------------------------

OneFormValue d_operator(const ScalarField& f, const Point& p, const FdSteps& steps) {
  const double h = fd_step(steps.first, p);
  require_margin(f.margin, p, h);
  FieldFn<double> fn = [&](const Point& x) {
    const double v = f.eval(x);
    if (!std::isfinite(v)) throw NumericalError("non-finite-field-value", f.name);
    return v;
  };
  const auto g = real_gradient(fn, p, h, steps.richardson);
  const int d = static_cast<int>(p.size());
  OneFormValue out = OneFormValue::zero(d);
  for (int l = 0; l < d; ++l) {
    out.dz(l) = wirtinger_dz(g, l);
    out.dzbar(l) = wirtinger_dzbar(g, l);
  }
  return out;
}

TwoFormValue d_operator(const OneFormField& theta, const Point& p, const FdSteps& steps) {
  const double h = fd_step(steps.first, p);
  require_margin(theta.margin, p, h);
  const int d = static_cast<int>(p.size());
  FieldFn<Eigen::VectorXcd> stacked = [&](const Point& x) {
    const OneFormValue v = theta.eval(x);
    Eigen::VectorXcd s(2 * d);
    s << v.dz, v.dzbar;
    if (!all_finite(s)) throw NumericalError("non-finite-field-value", theta.name);
    return s;
  };
  const auto g = real_gradient(stacked, p, h, steps.richardson);
  // jac_dz(l) = d/dz_l of the stacked components, jac_dzbar likewise
  std::vector<Eigen::VectorXcd> jdz(d), jdzbar(d);
  for (int l = 0; l < d; ++l) {
    jdz[l] = wirtinger_dz(g, l);
    jdzbar[l] = wirtinger_dzbar(g, l);
  }
  const cplx i(0, 1);
  TwoFormValue out = TwoFormValue::zero(d);
  for (int l = 0; l < d; ++l) {
    for (int j = 0; j < d; ++j) {
      // a_j = stacked(j), b_j = stacked(d + j)
      out.p20(l, j) = jdz[l](j) - jdz[j](l);
      out.p02(l, j) = jdzbar[l](d + j) - jdzbar[j](d + l);
      const cplx m = jdz[l](d + j) - jdzbar[j](l);
      out.h11(l, j) = -2.0 * i * m;
    }
  }
  return out;
}

OneFormValue conjugate_form(const OneFormValue& theta) {
  const cplx i(0, 1);
  return {-i * theta.dz, i * theta.dzbar};
}

OneFormField conjugate_field(const OneFormField& theta) {
  OneFormField out = theta;
  out.name = theta.name + "^c";
  auto inner = theta.eval;
  out.eval = [inner](const Point& p) { return conjugate_form(inner(p)); };
  return out;
}

TwoFormValue dc_operator(const OneFormField& theta, const Point& p, const FdSteps& steps) {
  return d_operator(conjugate_field(theta), p, steps) * -1.0;
}

TwoFormValue ddbar_potential(const ScalarField& f, const Point& p, const FdSteps& steps) {
  const double h = fd_step(steps.second, p);
  require_margin(f.margin, p, h);
  FieldFn<double> fn = [&](const Point& x) {
    const double v = f.eval(x);
    if (!std::isfinite(v)) throw NumericalError("non-finite-field-value", f.name);
    return v;
  };
  const auto hs = real_hessian(fn, p, h, steps.richardson);
  const int d = static_cast<int>(p.size());
  TwoFormValue out = TwoFormValue::zero(d);
  for (int l = 0; l < d; ++l) {
    for (int j = 0; j < d; ++j) out.h11(l, j) = wirtinger_ddbar(hs, l, j);
  }
  return out;
}

TwoFormValue wedge(const OneFormValue& a, const OneFormValue& b) {
  const int d = a.dim();
  const cplx i(0, 1);
  TwoFormValue out = TwoFormValue::zero(d);
  for (int l = 0; l < d; ++l) {
    for (int j = 0; j < d; ++j) {
      out.p20(l, j) = a.dz(l) * b.dz(j) - a.dz(j) * b.dz(l);
      out.p02(l, j) = a.dzbar(l) * b.dzbar(j) - a.dzbar(j) * b.dzbar(l);
      const cplx m = a.dz(l) * b.dzbar(j) - b.dz(l) * a.dzbar(j);
      out.h11(l, j) = -2.0 * i * m;
    }
  }
  return out;
}

double form_inner(const OneFormValue& a, const OneFormValue& b, const Eigen::MatrixXcd& h) {
  const Eigen::VectorXcd x = h.ldlt().solve(b.dz);
  return 4.0 * (a.dz.adjoint() * x)(0).real();
}

double form_norm_sq(const OneFormValue& a, const Eigen::MatrixXcd& h) { return form_inner(a, a, h); }

cplx ddbar_of_two_form(const FieldFn<Eigen::MatrixXcd>& h, const Point& p, double h_step, bool richardson) {
  if (p.size() != 2) throw std::invalid_argument("ddbar_of_two_form: complex surfaces only");
  const auto hs = real_hessian(h, p, h_step, richardson);
  const Eigen::MatrixXcd d11 = wirtinger_ddbar(hs, 0, 0);
  const Eigen::MatrixXcd d12 = wirtinger_ddbar(hs, 0, 1);
  const Eigen::MatrixXcd d21 = wirtinger_ddbar(hs, 1, 0);
  const Eigen::MatrixXcd d22 = wirtinger_ddbar(hs, 1, 1);
  const cplx i(0, 1);
  return -0.5 * i * (d11(1, 1) - d12(1, 0) - d21(0, 1) + d22(0, 0));
}

// ---------------------------------------------------------------------------

ChartAtlas ChartAtlas::projective(int n) {
  if (n < 1 || n > 3) throw std::invalid_argument("projective atlas: dimension must be 1, 2 or 3");
  ChartAtlas a;
  a.kind_ = BaseKind::ProjectiveSpace;
  a.dim_ = n;
  a.weights_.assign(static_cast<std::size_t>(n + 1), 1);
  return a;
}

ChartAtlas ChartAtlas::weighted_line(int a, int b) {
  if (a < 1 || b < 1) throw std::invalid_argument("weighted line: weights must be positive");
  if (std::gcd(a, b) != 1) throw std::invalid_argument("weighted line: weights must be coprime");
  ChartAtlas at;
  at.kind_ = BaseKind::WeightedLine;
  at.dim_ = 1;
  at.weights_ = {a, b};
  return at;
}

bool ChartAtlas::is_orbifold() const {
  return std::any_of(weights_.begin(), weights_.end(), [](int w) { return w > 1; });
}

Point ChartAtlas::lift(int chart, const Point& w, cplx c) const {
  if (w.size() != dim_) throw std::invalid_argument("lift: coordinate dimension mismatch");
  Point z(dim_ + 1);
  int k = 0;
  for (int i = 0; i <= dim_; ++i) {
    const cplx ci = std::pow(c, weights_[static_cast<std::size_t>(i)]);
    if (i == chart) {
      z(i) = ci;
    } else {
      z(i) = ci * w(k++);
    }
  }
  return z;
}

std::optional<std::pair<Point, cplx>> ChartAtlas::to_chart(int chart, const Point& z) const {
  const cplx zc = z(chart);
  if (std::abs(zc) == 0.0) return std::nullopt;
  const int a = weights_[static_cast<std::size_t>(chart)];
  const cplx c = (a == 1) ? zc : std::pow(zc, 1.0 / a);
  Point w(dim_);
  int k = 0;
  for (int i = 0; i <= dim_; ++i) {
    if (i == chart) continue;
    w(k++) = z(i) / std::pow(c, weights_[static_cast<std::size_t>(i)]);
  }
  return std::make_pair(w, c);
}

Point ChartAtlas::transition(int from, int to, const Point& w) const {
  const auto r = to_chart(to, lift(from, w));
  if (!r) throw NumericalError("chart-transition", "point not in target chart");
  return r->first;
}

bool ChartAtlas::same_orbifold_point(int chart, const Point& w1, const Point& w2, double tol) const {
  const int a = weights_[static_cast<std::size_t>(chart)];
  for (int m = 0; m < a; ++m) {
    const cplx zeta = std::polar(1.0, 2 * kPi * m / a);
    double err = 0;
    int k = 0;
    for (int i = 0; i <= dim_; ++i) {
      if (i == chart) continue;
      const cplx g = std::pow(zeta, weights_[static_cast<std::size_t>(i)]);
      err = std::max(err, std::abs(g * w1(k) - w2(k)));
      ++k;
    }
    if (err <= tol * (1.0 + w1.cwiseAbs().maxCoeff())) return true;
  }
  return false;
}

double projective_distance(const Eigen::VectorXcd& u, const Eigen::VectorXcd& v) {
  // |u_hat - <v_hat, u_hat> v_hat| = sin(angle), free of cancellation at small angles
  const Eigen::VectorXcd a = u / u.norm(), b = v / v.norm();
  return std::min(1.0, (a - b.dot(a) * b).norm());
}

double ChartAtlas::base_distance(const Point& z1, const Point& z2) const {
  if (kind_ == BaseKind::ProjectiveSpace) return projective_distance(z1, z2);
  const int a = weights_[0], b = weights_[1];
  Eigen::VectorXcd u(2), v(2);
  u << std::pow(z1(0), b), std::pow(z1(1), a);
  v << std::pow(z2(0), b), std::pow(z2(1), a);
  return projective_distance(u, v);
}

std::function<double(const Point&)> ChartAtlas::chart_margin() const {
  const double r = domain_radius();
  return [r](const Point& w) { return r - w.cwiseAbs().maxCoeff(); };
}

std::string ChartAtlas::describe() const {
  std::ostringstream os;
  if (kind_ == BaseKind::ProjectiveSpace) {
    os << "CP^" << dim_;
  } else {
    os << "CP^1(" << weights_[0] << "," << weights_[1] << ")";
  }
  return os.str();
}

// ---------------------------------------------------------------------------

namespace {

std::vector<cplx> polar_nodes(int radial, int angular, double exclusion) {
  std::vector<cplx> nodes;
  for (int i = 0; i < radial; ++i) {
    const double r = radial == 1 ? 1.0 : static_cast<double>(i) / (radial - 1);
    if (r < exclusion) continue;
    if (r == 0.0) {
      nodes.emplace_back(0.0, 0.0);
      continue;
    }
    for (int j = 0; j < angular; ++j) nodes.push_back(std::polar(r, 2 * kPi * j / angular));
  }
  return nodes;
}

}  // namespace

std::vector<GridPoint> base_grid(const ChartAtlas& atlas, int radial, int angular, double exclusion_radius) {
  if (radial < 1 || angular < 1) throw std::invalid_argument("base_grid: empty lattice");
  std::vector<GridPoint> out;
  const int n = atlas.dimension();
  for (int chart = 0; chart < atlas.num_charts(); ++chart) {
    const double excl = atlas.stabilizer_order(chart) > 1 ? exclusion_radius : 0.0;
    const auto nodes = polar_nodes(radial, angular, 0.0);
    // tensor lattice, excluding a ball around the orbifold point
    std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
    while (true) {
      Point w(n);
      for (int d = 0; d < n; ++d) w(d) = nodes[idx[static_cast<std::size_t>(d)]];
      if (w.norm() >= excl) out.push_back({chart, w});
      int d = 0;
      while (d < n && ++idx[static_cast<std::size_t>(d)] == nodes.size()) idx[static_cast<std::size_t>(d++)] = 0;
      if (d == n) break;
    }
  }
  return out;
}

std::vector<GridPoint> base_grid(const ChartAtlas& atlas, const GridSpec& spec) {
  return base_grid(atlas, spec.radial, spec.angular, spec.exclusion_radius);
}

std::vector<GridPoint> total_grid(const ChartAtlas& atlas, const GridSpec& spec) {
  const auto base = base_grid(atlas, spec.residual_radial, spec.residual_angular, spec.exclusion_radius);
  std::vector<cplx> fibers;
  for (int i = 0; i < spec.fiber_radial; ++i) {
    const double rho = spec.fiber_radial == 1 ? 1.0 : 0.75 + 0.25 * i / (spec.fiber_radial - 1);
    for (int j = 0; j < spec.fiber_angular; ++j) {
      fibers.push_back(std::polar(rho, 0.1 + 2 * kPi * j / spec.fiber_angular));
    }
  }
  std::vector<GridPoint> out;
  out.reserve(base.size() * fibers.size());
  for (const auto& b : base) {
    for (const cplx c : fibers) {
      Point p(b.coords.size() + 1);
      p << b.coords, c;
      out.push_back({b.chart, p});
    }
  }
  return out;
}

double cm_grid_norm(const ComponentField& field, std::span<const Point> points, int m, const FdSteps& steps) {
  if (points.empty()) throw std::invalid_argument("cm_grid_norm: empty grid");
  if (m < 0 || m > 2) throw std::invalid_argument("cm_grid_norm: m must be 0, 1 or 2");
  std::vector<double> local(points.size(), 0.0);
  FieldFn<Eigen::VectorXd> fn = field.eval;
  parallel_for(points.size(), [&](std::size_t i) {
    const Point& p = points[i];
    double s = fn(p).cwiseAbs().maxCoeff();
    if (m >= 1) {
      for (const auto& g : real_gradient(fn, p, fd_step(steps.first, p), steps.richardson)) {
        s = std::max(s, g.cwiseAbs().maxCoeff());
      }
    }
    if (m >= 2) {
      for (const auto& h : real_hessian(fn, p, fd_step(steps.second, p), steps.richardson).entries) {
        s = std::max(s, h.cwiseAbs().maxCoeff());
      }
    }
    local[i] = s;
  });
  double out = 0.0;
  for (const double v : local) out = std::max(out, v);
  return out;
}

double cm_grid_norm(const std::vector<ComponentField>& per_chart, std::span<const GridPoint> points, int m,
                    const FdSteps& steps) {
  if (points.empty()) throw std::invalid_argument("cm_grid_norm: empty grid");
  double out = 0.0;
  for (std::size_t c = 0; c < per_chart.size(); ++c) {
    std::vector<Point> pts;
    for (const auto& g : points) {
      if (g.chart == static_cast<int>(c)) pts.push_back(g.coords);
    }
    if (!pts.empty()) out = std::max(out, cm_grid_norm(per_chart[c], std::span<const Point>(pts), m, steps));
  }
  return out;
}

}  // namespace vaislab
