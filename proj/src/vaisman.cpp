#include "vaislab/vaisman.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace vaislab {

struct VaismanStructure::Cache {
  std::once_flag once;
  double lee_norm = 0;
};

namespace {

constexpr cplx kI(0, 1);

Point point2(cplx w, cplx c) {
  Point p(2);
  p << w, c;
  return p;
}

std::string describe_point(int chart, const Point& p) {
  std::ostringstream os;
  os << "chart " << chart << " at (";
  for (Eigen::Index i = 0; i < p.size(); ++i) os << (i ? ", " : "") << p(i);
  os << ")";
  return os.str();
}

FdSteps outer_steps(const FdSteps& s) {
  FdSteps o = s;
  o.first = s.nested;
  o.second = s.nested;
  return o;
}

// Rational p/q with q <= max_den and |x - p/q| <= tol, if any convergent hits it.
std::optional<std::pair<long long, long long>> exact_rational(double x, long long max_den, double tol) {
  for (const auto& [p, q] : convergents(x, max_den)) {
    if (std::abs(x - static_cast<double>(p) / static_cast<double>(q)) <= tol) return std::make_pair(p, q);
  }
  return std::nullopt;
}

// (i/2) ddbar of the potential restricted to the fiber value c = 1.
double base_density(const VaismanStructure& s, bool bundle_potential, int chart, cplx w, const FdSteps& steps) {
  if (bundle_potential) return s.bundle()->volume_density(chart, w);
  ScalarField f;
  f.name = "base potential";
  f.eval = [&s, chart](const Point& x) { return s.log_t2(chart, point2(x(0), 1.0)); };
  Point p(1);
  p << w;
  return ddbar_potential(f, p, steps).h11(0, 0).real();
}

bool is_bundle_potential(const VaismanStructure& s) {
  return s.mode() == VaismanStructure::Mode::Potential && s.uses_bundle_potential();
}

Eigen::MatrixXcd pull_back(const Eigen::MatrixXcd& h, const Eigen::VectorXcd& d) {
  return d.asDiagonal() * h * d.conjugate().asDiagonal();
}

}  // namespace

// ---------------------------------------------------------------------------

void ContractionSpec::validate(int num_coords) const {
  if (!(q > 0 && q < 1)) throw std::invalid_argument("contraction: q must lie in (0, 1)");
  if (!phase_turns.empty() && static_cast<int>(phase_turns.size()) != num_coords) {
    throw std::invalid_argument("contraction: one phase per homogeneous coordinate required");
  }
  for (double t : phase_turns) {
    if (!std::isfinite(t) || !exact_rational(t, 1000, 1e-12)) {
      throw std::invalid_argument("contraction: phases must be rational turns (finite order)");
    }
  }
}

long ContractionSpec::order() const {
  long ord = 1;
  for (double t : phase_turns) {
    const auto r = exact_rational(t, 1000, 1e-12);
    if (!r) throw std::invalid_argument("contraction: phase of infinite order");
    ord = std::lcm(ord, static_cast<long>(r->second));
  }
  return ord;
}

Eigen::VectorXcd ContractionSpec::homogeneous_diagonal(const std::vector<int>& weights) const {
  Eigen::VectorXcd d(static_cast<Eigen::Index>(weights.size()));
  for (std::size_t j = 0; j < weights.size(); ++j) {
    d(static_cast<Eigen::Index>(j)) = std::pow(q, weights[j]) * std::polar(1.0, 2 * kPi * phase(j));
  }
  return d;
}

// ---------------------------------------------------------------------------

VaismanStructure VaismanStructure::from_log_potential(const HermitianBundle& bundle,
                                                      const ContractionSpec& contraction,
                                                      std::function<double(const Point& z)> log_t2,
                                                      std::string name) {
  const auto& atlas = bundle.atlas();
  if (atlas.dimension() != 1) {
    throw std::invalid_argument("Vaisman structures: one-dimensional bases only");
  }
  contraction.validate(atlas.num_charts());
  VaismanStructure s;
  s.mode_ = Mode::Potential;
  s.name_ = std::move(name);
  s.log_t2_ = std::move(log_t2);
  s.bundle_ = bundle;
  s.contraction_ = contraction;
  s.q_ = contraction.q;
  s.cache_ = std::make_shared<Cache>();
  const auto& wts = atlas.weights();
  const double dr = atlas.domain_radius();
  for (int c = 0; c < atlas.num_charts(); ++c) {
    ConeChart ch;
    ch.dim = 2;
    ch.to_homogeneous = [atlas, c](const Point& p) {
      Point w(1);
      w << p(0);
      return atlas.lift(c, w, p(1));
    };
    const int o = 1 - c;
    const double ac = wts[static_cast<std::size_t>(c)], ao = wts[static_cast<std::size_t>(o)];
    const double phc = contraction.phase(static_cast<std::size_t>(c));
    const double pho = contraction.phase(static_cast<std::size_t>(o));
    ch.gamma.resize(2);
    ch.gamma(0) = std::polar(1.0, 2 * kPi * (pho - ao * phc / ac));
    ch.gamma(1) = contraction.q * std::polar(1.0, 2 * kPi * phc / ac);
    ch.margin = [dr](const Point& p) { return std::min(dr - std::abs(p(0)), std::abs(p(1))); };
    s.charts_.push_back(std::move(ch));
  }
  return s;
}

VaismanStructure VaismanStructure::from_bundle(const HermitianBundle& bundle, const ContractionSpec& contraction) {
  const HermitianBundle b = bundle;
  VaismanStructure s = from_log_potential(
      bundle, contraction, [b](const Point& z) { return b.log_t2(z); }, "cone(" + bundle.describe() + ")");
  s.bundle_potential_ = true;
  return s;
}

VaismanStructure VaismanStructure::on_vector_space(int m, const Eigen::VectorXcd& gamma,
                                                   std::function<double(const Point& z)> log_t2, std::string name) {
  if (m < 1 || gamma.size() != m) throw std::invalid_argument("on_vector_space: dimension mismatch");
  double qmax = 0;
  for (Eigen::Index j = 0; j < gamma.size(); ++j) {
    const double r = std::abs(gamma(j));
    if (!(r > 0 && r < 1)) throw NumericalError("not-a-contraction", "eigenvalue modulus outside (0,1)");
    qmax = std::max(qmax, r);
  }
  VaismanStructure s;
  s.mode_ = Mode::Potential;
  s.name_ = std::move(name);
  s.log_t2_ = std::move(log_t2);
  s.q_ = qmax;
  s.vector_space_dim_ = m;
  s.cache_ = std::make_shared<Cache>();
  ConeChart ch;
  ch.dim = m;
  ch.gamma = gamma;
  ch.margin = [](const Point& p) { return p.norm(); };
  s.charts_.push_back(std::move(ch));
  return s;
}

VaismanStructure VaismanStructure::explicit_fields(const VaismanStructure& base, std::vector<ConeChart> charts,
                                                   std::string name) {
  if (charts.size() != base.charts_.size()) throw std::invalid_argument("explicit_fields: chart count mismatch");
  VaismanStructure s = base;
  s.mode_ = Mode::Explicit;
  s.name_ = std::move(name);
  s.charts_ = std::move(charts);
  s.log_t2_ = nullptr;
  s.bundle_potential_ = false;
  s.cache_ = std::make_shared<Cache>();
  return s;
}

double VaismanStructure::log_t2(int c, const Point& p) const {
  if (mode_ != Mode::Potential) throw std::logic_error("explicit-mode structure has no cone potential");
  const auto& ch = chart(c);
  return ch.to_homogeneous ? log_t2_(ch.to_homogeneous(p)) : log_t2_(p);
}

ScalarField VaismanStructure::log_t2_field(int c) const {
  ScalarField f;
  f.name = "log t^2";
  f.dim = chart(c).dim;
  f.eval = [this, c](const Point& p) { return log_t2(c, p); };
  f.margin = chart(c).margin;
  return f;
}

ScalarField VaismanStructure::t2_field(int c) const {
  ScalarField f = log_t2_field(c);
  f.name = "t^2";
  f.eval = [this, c](const Point& p) { return t2(c, p); };
  return f;
}

OneFormValue VaismanStructure::theta(int c, const Point& p, const FdSteps& steps) const {
  if (mode_ == Mode::Explicit) return chart(c).theta(p);
  return d_operator(log_t2_field(c), p, steps) * -1.0;
}

OneFormField VaismanStructure::theta_field(int c, const FdSteps& steps) const {
  OneFormField f;
  f.name = "theta";
  f.dim = chart(c).dim;
  f.eval = [this, c, steps](const Point& p) { return theta(c, p, steps); };
  f.margin = chart(c).margin;
  return f;
}

TwoFormValue VaismanStructure::cone_form(int c, const Point& p, const FdSteps& steps) const {
  if (mode_ == Mode::Explicit) throw std::logic_error("explicit-mode structure has no cone form");
  return ddbar_potential(t2_field(c), p, steps);
}

TwoFormValue VaismanStructure::omega(int c, const Point& p, const FdSteps& steps) const {
  if (mode_ == Mode::Explicit) return chart(c).omega(p);
  return cone_form(c, p, steps) * (1.0 / t2(c, p));
}

TwoFormValue VaismanStructure::omega0(int c, const Point& p, const FdSteps& steps) const {
  return dc_operator(theta_field(c, steps), p, outer_steps(steps));
}

TwoFormValue VaismanStructure::omega0_from_potential(int c, const Point& p, const FdSteps& steps) const {
  return ddbar_potential(log_t2_field(c), p, steps) * 4.0;
}

std::vector<GridPoint> VaismanStructure::samples(const GridSpec& spec) const {
  if (bundle_) return total_grid(bundle_->atlas(), spec);
  // deterministic points on shells 0.75 <= |Z| <= 1
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.75, 1.0);
  const int count = std::max(8, spec.residual_radial * spec.residual_angular / 4);
  std::vector<GridPoint> out;
  for (int i = 0; i < count; ++i) {
    Point z(vector_space_dim_);
    for (int j = 0; j < vector_space_dim_; ++j) z(j) = cplx(nd(rng), nd(rng));
    z *= ud(rng) / z.norm();
    out.push_back({0, z});
  }
  return out;
}

std::string VaismanStructure::grid_label(const GridSpec& spec) const {
  std::ostringstream os;
  if (bundle_) {
    os << "total " << spec.residual_radial << "x" << spec.residual_angular << " base x " << spec.fiber_radial << "x"
       << spec.fiber_angular << " fiber";
  } else {
    os << samples(spec).size() << " shell samples in C^" << vector_space_dim_;
  }
  return os.str();
}

double VaismanStructure::lee_norm_constant(const GridSpec& spec) const {
  std::call_once(cache_->once, [&] {
    const auto pts = samples(spec);
    const auto& g = pts.front();
    cache_->lee_norm = std::sqrt(form_norm_sq(theta(g.chart, g.coords, spec.fd), omega(g.chart, g.coords, spec.fd).h11));
  });
  return cache_->lee_norm;
}

// ---------------------------------------------------------------------------

double cone_coordinate(const HermitianBundle& bundle, int chart, const Point& w, cplx c) {
  if (std::abs(c) == 0.0) throw NumericalError("zero-fiber-vector", "t is undefined on the zero section");
  return std::abs(c) * std::exp(0.5 * bundle.psi(chart, w));
}

double cone_coordinate(const HermitianBundle& bundle, const Point& z) {
  if (z.norm() == 0.0) throw NumericalError("zero-fiber-vector", "t is undefined on the zero section");
  return std::exp(0.5 * bundle.log_t2(z));
}

VaismanStructure vaisman_from_cone(const HermitianBundle& bundle, const ContractionSpec& contraction,
                                   const GridSpec& spec) {
  bundle.check_positive(base_grid(bundle.atlas(), spec));
  VaismanStructure s = VaismanStructure::from_bundle(bundle, contraction);
  for (const auto& g : s.samples(spec)) {
    const Point gp = s.chart(g.chart).gamma.cwiseProduct(g.coords);
    const double q2 = contraction.q * contraction.q;
    const double rel = std::abs(s.t2(g.chart, gp) - q2 * s.t2(g.chart, g.coords)) / (q2 * s.t2(g.chart, g.coords));
    if (!(rel <= 1e-10)) {
      std::ostringstream os;
      os << "t^2(gamma p) != q^2 t^2(p) (relative " << rel << ") at " << describe_point(g.chart, g.coords);
      throw NumericalError("automorphy", os.str());
    }
    if (!s.omega(g.chart, g.coords, spec.fd).positive_definite()) {
      throw NumericalError("omega-not-positive", describe_point(g.chart, g.coords));
    }
  }
  return s;
}

IdentityResidual vaisman_identity_residual(const VaismanStructure& s, const GridSpec& spec) {
  const auto pts = s.samples(spec);
  std::vector<double> res(pts.size()), norms(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    const auto& g = pts[i];
    const TwoFormValue om = s.omega(g.chart, g.coords, spec.fd);
    const OneFormValue th = s.theta(g.chart, g.coords, spec.fd);
    const double n2 = form_norm_sq(th, om.h11);
    if (!(n2 > 1e-14)) throw NumericalError("lee-form-vanishes", describe_point(g.chart, g.coords));
    const TwoFormValue rhs = (s.omega0(g.chart, g.coords, spec.fd) + wedge(th, conjugate_form(th))) * (1.0 / n2);
    res[i] = (om - rhs).max_abs();
    norms[i] = std::sqrt(n2);
  });
  IdentityResidual out;
  for (double r : res) out.value = std::max(out.value, r);
  for (double n : norms) out.lee_norm_mean += n;
  out.lee_norm_mean /= static_cast<double>(norms.size());
  for (double n : norms) out.lee_norm_variance += (n - out.lee_norm_mean) * (n - out.lee_norm_mean);
  out.lee_norm_variance /= static_cast<double>(norms.size());
  return out;
}

TransverseCheck transverse_form_check(const VaismanStructure& s, const GridSpec& spec, double kernel_tol) {
  if (!s.bundle()) throw std::invalid_argument("transverse_form_check: structure has no base");
  const bool bundle_pot = is_bundle_potential(s);
  const auto pts = s.samples(spec);
  struct Local {
    double dens = 0;
    Eigen::MatrixXcd h0;
    double kernel = 0, lee = 0;
  };
  std::vector<Local> loc(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    const auto& g = pts[i];
    Local& l = loc[i];
    l.h0 = s.omega0(g.chart, g.coords, spec.fd).h11;
    l.dens = base_density(s, bundle_pot, g.chart, g.coords(0), spec.fd);
    const Eigen::MatrixXcd herm = 0.5 * (l.h0 + l.h0.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
    l.kernel = lmax > 0 ? std::abs(lmin) / lmax : std::numeric_limits<double>::infinity();
    if (!(l.kernel <= kernel_tol)) {
      std::ostringstream os;
      os << "eigenvalues " << lmin << ", " << lmax << " at " << describe_point(g.chart, g.coords);
      throw NumericalError("transverse-kernel-dimension", os.str());
    }
    // theta^# as a (1,0)-vector: xi = 2 (H_omega^T)^{-1} conj(a)
    const OneFormValue th = s.theta(g.chart, g.coords, spec.fd);
    const Eigen::MatrixXcd hw = s.omega(g.chart, g.coords, spec.fd).h11;
    const Eigen::VectorXcd xi = 2.0 * hw.transpose().fullPivLu().solve(th.dz.conjugate());
    l.lee = (xi.transpose() * l.h0).norm() / (l.h0.norm() * xi.norm());
  });
  TransverseCheck out;
  out.constant = loc.front().h0(0, 0).real() / loc.front().dens;
  for (const auto& l : loc) {
    Eigen::MatrixXcd ref = Eigen::MatrixXcd::Zero(2, 2);
    ref(0, 0) = out.constant * l.dens;
    out.max_rel_dev = std::max(out.max_rel_dev, (l.h0 - ref).cwiseAbs().maxCoeff() / std::abs(ref(0, 0)));
    out.kernel_ratio = std::max(out.kernel_ratio, l.kernel);
    out.lee_in_kernel = std::max(out.lee_in_kernel, l.lee);
  }
  return out;
}

double gauduchon_residual(const VaismanStructure& s, const GridSpec& spec) {
  const auto pts = s.samples(spec);
  // inner Hessian at the nested step: roundoff of a 1e-3 inner step dominates otherwise
  FdSteps inner = spec.fd;
  inner.second = spec.fd.nested;
  std::vector<double> res(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    const auto& g = pts[i];
    if (g.coords.size() != 2) throw std::invalid_argument("gauduchon_residual: complex surfaces only");
    FieldFn<Eigen::MatrixXcd> h = [&](const Point& x) { return Eigen::MatrixXcd(s.omega(g.chart, x, inner).h11); };
    res[i] = std::abs(ddbar_of_two_form(h, g.coords, fd_step(spec.fd.nested, g.coords), spec.fd.richardson));
  });
  return *std::max_element(res.begin(), res.end());
}

std::vector<ResidualRecord> automorphy_residuals(const VaismanStructure& s, const GridSpec& spec, double tol) {
  const auto pts = s.samples(spec);
  const bool pot = s.mode() == VaismanStructure::Mode::Potential;
  const double q2 = s.q() * s.q();
  std::vector<std::array<double, 4>> loc(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    const auto& g = pts[i];
    const Eigen::VectorXcd& d = s.chart(g.chart).gamma;
    const Point gp = d.cwiseProduct(g.coords);
    auto& r = loc[i];
    r.fill(0.0);
    if (pot) {
      const double t0 = s.t2(g.chart, g.coords);
      r[0] = std::abs(s.t2(g.chart, gp) - q2 * t0) / (q2 * t0);
      const Eigen::MatrixXcd o0 = s.cone_form(g.chart, g.coords, spec.fd).h11;
      const Eigen::MatrixXcd o1 = pull_back(s.cone_form(g.chart, gp, spec.fd).h11, d);
      r[1] = (o1 - q2 * o0).cwiseAbs().maxCoeff() / (q2 * o0.cwiseAbs().maxCoeff());
    }
    const Eigen::MatrixXcd w0 = s.omega(g.chart, g.coords, spec.fd).h11;
    const Eigen::MatrixXcd w1 = pull_back(s.omega(g.chart, gp, spec.fd).h11, d);
    r[2] = (w1 - w0).cwiseAbs().maxCoeff() / w0.cwiseAbs().maxCoeff();
    const OneFormValue a0 = s.theta(g.chart, g.coords, spec.fd);
    const OneFormValue a1 = s.theta(g.chart, gp, spec.fd);
    const Eigen::VectorXcd pulled = d.cwiseProduct(a1.dz);
    r[3] = (pulled - a0.dz).cwiseAbs().maxCoeff() / a0.dz.cwiseAbs().maxCoeff();
  });
  std::array<double, 4> worst{0, 0, 0, 0};
  for (const auto& r : loc) {
    for (std::size_t j = 0; j < 4; ++j) worst[j] = std::max(worst[j], r[j]);
  }
  const std::string grid = s.grid_label(spec);
  std::vector<ResidualRecord> out;
  const char* names[4] = {"automorphy-t2", "automorphy-Omega", "automorphy-omega", "automorphy-theta"};
  for (std::size_t j = pot ? 0 : 2; j < 4; ++j) out.push_back({names[j], grid, worst[j], tol, worst[j] <= tol});
  return out;
}

double lee_closedness_residual(const VaismanStructure& s, const GridSpec& spec) {
  const auto pts = s.samples(spec);
  std::vector<double> res(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    const auto& g = pts[i];
    res[i] = d_operator(s.theta_field(g.chart, spec.fd), g.coords, outer_steps(spec.fd)).max_abs();
  });
  return *std::max_element(res.begin(), res.end());
}

double transverse_closedness_residual(const VaismanStructure& s, const GridSpec& spec) {
  const auto pts = s.samples(spec);
  std::vector<double> res(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    const auto& g = pts[i];
    FieldFn<Eigen::MatrixXcd> h = [&](const Point& x) {
      return Eigen::MatrixXcd(s.omega0_from_potential(g.chart, x, spec.fd).h11);
    };
    const auto grad = real_gradient(h, g.coords, fd_step(spec.fd.nested, g.coords), spec.fd.richardson);
    const int d = static_cast<int>(g.coords.size());
    double worst = 0;
    // d-bar-free part of d omega_0: d_l H_{m j} - d_m H_{l j}
    for (int l = 0; l < d; ++l) {
      for (int m = l + 1; m < d; ++m) {
        const Eigen::MatrixXcd dl = wirtinger_dz(grad, l);
        const Eigen::MatrixXcd dm = wirtinger_dz(grad, m);
        for (int j = 0; j < d; ++j) worst = std::max(worst, std::abs(dl(m, j) - dm(l, j)));
      }
    }
    res[i] = worst;
  });
  return *std::max_element(res.begin(), res.end());
}

// ---------------------------------------------------------------------------

VaismanStructure sigma_homothety(const VaismanStructure& s, double a) {
  if (!(a > 0) || !std::isfinite(a)) throw std::invalid_argument("sigma_homothety: a must be positive");
  if (s.mode() != VaismanStructure::Mode::Potential) {
    throw std::invalid_argument("sigma_homothety: requires a cone potential");
  }
  if (a == 1.0) return s;
  auto base = s.log_potential();
  std::ostringstream name;
  name << "Sigma_" << a << "(" << s.name() << ")";
  auto pot = [base, a](const Point& z) { return a * base(z); };
  VaismanStructure out = s.bundle()
                             ? VaismanStructure::from_log_potential(*s.bundle(), s.contraction(), pot, name.str())
                             : VaismanStructure::on_vector_space(s.chart(0).dim, s.chart(0).gamma, pot, name.str());
  out.set_b1(s.b1());
  out.set_q(std::pow(s.q(), a));
  return out;
}

VaismanStructure type_I_deformation(const VaismanStructure& s, double a, const std::vector<OneFormField>& alpha,
                                    const GridSpec& spec, double tol) {
  if (!(a > 0) || !std::isfinite(a)) throw std::invalid_argument("type_I_deformation: a must be positive");
  if (!alpha.empty() && static_cast<int>(alpha.size()) != s.num_charts()) {
    throw std::invalid_argument("type_I_deformation: alpha must be given on every chart");
  }
  if (!alpha.empty()) {
    const auto pts = s.samples(spec);
    double closed = 0, orth = 0, cod = 0, size = 0;
    for (const auto& g : pts) {
      const OneFormField& al = alpha[static_cast<std::size_t>(g.chart)];
      const OneFormValue av = al.eval(g.coords);
      size = std::max(size, av.max_abs());
      closed = std::max(closed, d_operator(al, g.coords, spec.fd).max_abs());
      const OneFormValue th = s.theta(g.chart, g.coords, spec.fd);
      const Eigen::MatrixXcd hw = s.omega(g.chart, g.coords, spec.fd).h11;
      orth = std::max({orth, std::abs(form_inner(av, th, hw)), std::abs(form_inner(av, conjugate_form(th), hw))});
      // Euclidean codifferential of the real components 2Re(a_l) dx_l - 2Im(a_l) dy_l
      const int d = static_cast<int>(g.coords.size());
      FieldFn<Eigen::VectorXd> comps = [&](const Point& x) {
        const OneFormValue v = al.eval(x);
        Eigen::VectorXd r(2 * d);
        for (int l = 0; l < d; ++l) {
          r(2 * l) = 2 * v.dz(l).real();
          r(2 * l + 1) = -2 * v.dz(l).imag();
        }
        return r;
      };
      const auto grad = real_gradient(comps, g.coords, fd_step(spec.fd.first, g.coords), spec.fd.richardson);
      double div = 0;
      for (int r = 0; r < 2 * d; ++r) div += grad[static_cast<std::size_t>(r)](r);
      cod = std::max(cod, std::abs(div));
    }
    if (closed > tol) throw NumericalError("alpha-not-closed", "sup |d alpha| = " + std::to_string(closed));
    if (orth > tol) throw NumericalError("alpha-not-orthogonal", "sup |<alpha, theta>| = " + std::to_string(orth));
    if (cod > tol) throw NumericalError("alpha-not-coclosed", "sup |d* alpha| = " + std::to_string(cod));
    if (size > tol && s.b1() == 1) {
      throw NumericalError("b1-obstruction", "b1 = 1: every harmonic 1-form is a multiple of theta");
    }
  }
  std::vector<ConeChart> charts;
  for (int c = 0; c < s.num_charts(); ++c) {
    ConeChart ch = s.chart(c);
    const FdSteps fd = spec.fd;
    const OneFormField* al = alpha.empty() ? nullptr : &alpha[static_cast<std::size_t>(c)];
    std::function<OneFormValue(const Point&)> al_eval;
    if (al) al_eval = al->eval;
    auto th = [s, c, a, fd, al_eval](const Point& p) {
      OneFormValue v = s.theta(c, p, fd) * a;
      if (al_eval) v = v + al_eval(p);
      return v;
    };
    ch.theta = th;
    const auto margin = ch.margin;
    ch.omega = [th, fd, margin](const Point& p) {
      OneFormField f;
      f.name = "theta'";
      f.dim = static_cast<int>(p.size());
      f.eval = th;
      f.margin = margin;
      const OneFormValue v = th(p);
      return dc_operator(f, p, outer_steps(fd)) + wedge(v, conjugate_form(v));
    };
    charts.push_back(std::move(ch));
  }
  std::ostringstream name;
  name << "typeI(a=" << a << (alpha.empty() ? "" : ", alpha") << ")(" << s.name() << ")";
  VaismanStructure out = VaismanStructure::explicit_fields(s, std::move(charts), name.str());
  out.set_normalized(true);
  out.set_q(std::pow(s.q(), a));
  return out;
}

VaismanStructure type_II_deformation(const VaismanStructure& s, const BasicFunction& f, const GridSpec& spec) {
  if (s.mode() != VaismanStructure::Mode::Potential || !s.bundle()) {
    throw std::invalid_argument("type_II_deformation: requires a cone potential over a base");
  }
  const auto& atlas = s.bundle()->atlas();
  const bool bundle_pot = is_bundle_potential(s);
  for (const auto& g : base_grid(atlas, spec)) {
    ScalarField fs;
    fs.name = f.name;
    const int chart = g.chart;
    fs.eval = [&f, &atlas, chart](const Point& w) { return f.eval(atlas.lift(chart, w, 1.0)); };
    const double lam = base_density(s, bundle_pot, chart, g.coords(0), spec.fd) +
                       2.0 * ddbar_potential(fs, g.coords, spec.fd).h11(0, 0).real();
    if (!(lam > 0)) {
      std::ostringstream os;
      os << "omega_X + i ddbar f = " << lam << " at " << describe_point(chart, g.coords);
      throw NumericalError("transverse-form-not-positive", os.str());
    }
  }
  auto base = s.log_potential();
  auto fe = f.eval;
  VaismanStructure out = VaismanStructure::from_log_potential(
      *s.bundle(), s.contraction(), [base, fe](const Point& z) { return base(z) + 2.0 * fe(z); },
      "typeII(" + f.name + ")(" + s.name() + ")");
  out.set_b1(s.b1());
  return out;
}

TypeIIReport verify_type_II(const VaismanStructure& before, const VaismanStructure& after, const BasicFunction& f,
                            const GridSpec& spec, int radial, int angular) {
  if (!before.bundle()) throw std::invalid_argument("verify_type_II: structure has no base");
  TypeIIReport rep;
  const auto pts = before.samples(spec);
  std::vector<double> res(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    const auto& g = pts[i];
    ScalarField fs;
    fs.name = f.name;
    fs.margin = before.chart(g.chart).margin;
    const auto& ch = before.chart(g.chart);
    fs.eval = [&](const Point& p) { return f.eval(ch.to_homogeneous(p)); };
    const OneFormValue expect = before.theta(g.chart, g.coords, spec.fd) - d_operator(fs, g.coords, spec.fd) * 2.0;
    res[i] = (after.theta(g.chart, g.coords, spec.fd) - expect).max_abs();
  });
  rep.lee_relation = *std::max_element(res.begin(), res.end());

  const auto rule = make_quadrature(*before.bundle(), radial, angular);
  const bool bpot = is_bundle_potential(before);
  const bool apot = is_bundle_potential(after);
  FdSteps plain = spec.fd;
  for (const auto& n : rule.nodes) {
    rep.volume_before += n.area_weight * base_density(before, bpot, n.chart, n.w, plain);
    rep.volume_after += n.area_weight * base_density(after, apot, n.chart, n.w, plain);
  }
  rep.class_relative = std::abs(rep.volume_after - rep.volume_before) / rep.volume_before;
  return rep;
}

double field_distance_scaled(const VaismanStructure& s1, const VaismanStructure& s2, double omega_scale,
                             const GridSpec& spec) {
  const auto pts = s1.samples(spec);
  std::vector<double> res(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    const auto& g = pts[i];
    const double dw = (s1.omega(g.chart, g.coords, spec.fd) - s2.omega(g.chart, g.coords, spec.fd) * omega_scale)
                          .max_abs();
    const double dt = (s1.theta(g.chart, g.coords, spec.fd) - s2.theta(g.chart, g.coords, spec.fd)).max_abs();
    res[i] = std::max(dw, dt);
  });
  return *std::max_element(res.begin(), res.end());
}

double field_distance(const VaismanStructure& s1, const VaismanStructure& s2, const GridSpec& spec) {
  return field_distance_scaled(s1, s2, 1.0, spec);
}

// ---------------------------------------------------------------------------

std::vector<std::pair<long long, long long>> convergents(double x, long long max_den) {
  if (!std::isfinite(x)) throw std::invalid_argument("convergents: non-finite input");
  std::vector<std::pair<long long, long long>> out;
  long long h2 = 0, h1 = 1, k2 = 1, k1 = 0;
  double r = x;
  for (int it = 0; it < 64; ++it) {
    const double a = std::floor(r);
    if (std::abs(a) > 9e15) break;
    const auto ai = static_cast<long long>(a);
    const long long h = ai * h1 + h2, k = ai * k1 + k2;
    if (k > max_den) break;
    out.emplace_back(h, k);
    if (std::abs(x - static_cast<double>(h) / static_cast<double>(k)) <= 1e-15 * std::max(1.0, std::abs(x))) break;
    const double frac = r - a;
    if (frac <= 0) break;
    r = 1.0 / frac;
    h2 = h1;
    h1 = h;
    k2 = k1;
    k1 = k;
  }
  return out;
}

std::vector<LeeApproximant> rational_lee_approximation(const LeeClassCoords& lee, double tol, long long max_den) {
  if (!(tol > 0)) throw std::invalid_argument("rational_lee_approximation: tol must be positive");
  if (lee.b1 < 1 || static_cast<int>(lee.coords.size()) != lee.b1) {
    throw std::invalid_argument("rational_lee_approximation: lattice rank must equal b1");
  }
  if (max_den < 1) throw std::invalid_argument("rational_lee_approximation: max_den must be positive");
  const auto& x = lee.coords;
  for (double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument("rational_lee_approximation: non-finite coordinate");
  }
  const std::size_t n = x.size();
  const double xx = std::inner_product(x.begin(), x.end(), x.begin(), 0.0);

  auto make = [&](long long q) {
    LeeApproximant ap;
    ap.denominator = q;
    for (double v : x) ap.numerators.push_back(std::llround(v * static_cast<double>(q)));
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = static_cast<double>(ap.numerators[i]) / static_cast<double>(q);
      ap.error = std::max(ap.error, std::abs(r[i] - x[i]));
    }
    ap.a = xx > 0 ? std::inner_product(r.begin(), r.end(), x.begin(), 0.0) / xx : 1.0;
    for (std::size_t i = 0; i < n; ++i) ap.alpha.push_back(r[i] - ap.a * x[i]);
    return ap;
  };

  // exactly rational classes are their own approximation
  long long q_exact = 1;
  bool rational = true;
  for (double v : x) {
    const auto r = exact_rational(v, max_den, 1e-15 * std::max(1.0, std::abs(v)));
    if (!r) {
      rational = false;
      break;
    }
    q_exact = std::lcm(q_exact, r->second);
    if (q_exact > max_den) {
      rational = false;
      break;
    }
  }
  if (rational) {
    LeeApproximant ap = make(q_exact);
    ap.a = 1.0;
    ap.error = 0.0;
    std::fill(ap.alpha.begin(), ap.alpha.end(), 0.0);
    return {ap};
  }

  std::vector<std::vector<std::pair<long long, long long>>> cf(n);
  for (std::size_t i = 0; i < n; ++i) cf[i] = convergents(x[i], max_den);
  std::vector<std::size_t> idx(n, 0);
  std::vector<LeeApproximant> out;
  while (true) {
    long long q = 1;
    bool overflow = false;
    for (std::size_t i = 0; i < n; ++i) {
      q = std::lcm(q, cf[i][idx[i]].second);
      if (q > max_den) {
        overflow = true;
        break;
      }
    }
    if (overflow) break;
    if (out.empty() || out.back().denominator != q) {
      out.push_back(make(q));
      if (out.back().error <= tol) break;
    }
    // advance the coordinate whose own convergent is worst
    std::size_t worst = n;
    double werr = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (idx[i] + 1 >= cf[i].size()) continue;
      const auto [p, qq] = cf[i][idx[i]];
      const double e = std::abs(x[i] - static_cast<double>(p) / static_cast<double>(qq));
      if (e > werr) {
        werr = e;
        worst = i;
      }
    }
    if (worst == n) break;
    ++idx[worst];
  }
  return out;
}

}  // namespace vaislab
