#pragma once

// Chart atlases for CP^n and weighted projective lines, sampled fields,
// and finite-difference differential operators on forms.
//
// Conventions (used everywhere in the library):
//  * A real (1,1)-form is stored as a Hermitian matrix H in units of
//    (i/2) dz_l ^ dzbar_j, so H = I is the Euclidean Kahler form.
//  * d^c = i(dbar - d) on functions, so d d^c f = 2i ddbar f. On 1-forms
//    the rotation theta^c takes dz -> -i dz and dzbar -> i dzbar, which
//    gives (d f)^c = d^c f, and d^c theta := -d(theta^c). For a closed
//    theta = d phi this is d^c theta = -2i ddbar phi (H = -4 phi_{l jbar}).

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <exception>
#include <mutex>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "vaislab/error.hpp"

namespace vaislab {

using cplx = std::complex<double>;
using Point = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Finite differences

struct FdSteps {
  double first = 1e-4;   // relative step for first derivatives
  double second = 1e-3;  // relative step for second derivatives
  double nested = 1e-2;  // relative step for second derivatives of FD-computed fields
  bool richardson = true;
};

/// Absolute step for a relative step at point p.
double fd_step(double rel, const Point& p);

/// Unit real direction r in C^d: r = 2l is d/dx_l, r = 2l+1 is d/dy_l.
Point real_direction(int dim, int r);

template <class V>
using FieldFn = std::function<V(const Point&)>;

/// Central first derivatives along all 2d real directions, optionally with
/// one Richardson level (error O(h^4)).
template <class V>
std::vector<V> real_gradient(const FieldFn<V>& f, const Point& p, double h, bool richardson) {
  const int d = static_cast<int>(p.size());
  std::vector<V> g;
  g.reserve(2 * d);
  for (int r = 0; r < 2 * d; ++r) {
    const Point e = real_direction(d, r);
    auto central = [&](double s) -> V {
      V fp = f(p + cplx(s) * e);
      V fm = f(p - cplx(s) * e);
      return V((fp - fm) / (2 * s));
    };
    if (richardson) {
      V coarse = central(h);
      V fine = central(h / 2);
      g.push_back(V((4.0 * fine - coarse) / 3.0));
    } else {
      g.push_back(central(h));
    }
  }
  return g;
}

/// Symmetric real Hessian, packed: index(r, s) for r <= s.
template <class V>
struct PackedHessian {
  int n = 0;
  std::vector<V> entries;
  const V& operator()(int r, int s) const {
    if (r > s) std::swap(r, s);
    return entries[static_cast<std::size_t>(r * n - r * (r - 1) / 2 + (s - r))];
  }
};

template <class V>
PackedHessian<V> real_hessian(const FieldFn<V>& f, const Point& p, double h, bool richardson) {
  const int d = static_cast<int>(p.size());
  const int n = 2 * d;
  const V f0 = f(p);
  auto second = [&](int r, int s, double step) -> V {
    const Point er = real_direction(d, r);
    if (r == s) {
      V fp = f(p + cplx(step) * er);
      V fm = f(p - cplx(step) * er);
      return V((fp - 2.0 * f0 + fm) / (step * step));
    }
    const Point es = real_direction(d, s);
    const cplx st(step);
    V fpp = f(p + st * er + st * es);
    V fpm = f(p + st * er - st * es);
    V fmp = f(p - st * er + st * es);
    V fmm = f(p - st * er - st * es);
    return V((fpp - fpm - fmp + fmm) / (4 * step * step));
  };
  PackedHessian<V> out;
  out.n = n;
  out.entries.reserve(static_cast<std::size_t>(n * (n + 1) / 2));
  for (int r = 0; r < n; ++r) {
    for (int s = r; s < n; ++s) {
      if (richardson) {
        V coarse = second(r, s, h);
        V fine = second(r, s, h / 2);
        out.entries.push_back(V((4.0 * fine - coarse) / 3.0));
      } else {
        out.entries.push_back(second(r, s, h));
      }
    }
  }
  return out;
}

/// d/dz_l and d/dzbar_l from real gradient entries.
template <class V>
auto wirtinger_dz(const std::vector<V>& g, int l) {
  const cplx i(0, 1);
  return 0.5 * (g[2 * l] - i * g[2 * l + 1]);
}
template <class V>
auto wirtinger_dzbar(const std::vector<V>& g, int l) {
  const cplx i(0, 1);
  return 0.5 * (g[2 * l] + i * g[2 * l + 1]);
}
/// d^2 / dz_l dzbar_j from a real Hessian.
template <class V>
auto wirtinger_ddbar(const PackedHessian<V>& hs, int l, int j) {
  const cplx i(0, 1);
  return 0.25 * (hs(2 * l, 2 * j) + hs(2 * l + 1, 2 * j + 1) +
                 i * (hs(2 * l, 2 * j + 1) - hs(2 * l + 1, 2 * j)));
}

// ---------------------------------------------------------------------------
// Form values

/// Value of a (complex) 1-form: sum a_l dz_l + b_l dzbar_l.
struct OneFormValue {
  Eigen::VectorXcd dz;
  Eigen::VectorXcd dzbar;

  static OneFormValue zero(int dim);
  static OneFormValue real_from(const Eigen::VectorXcd& a);  // a dz + conj(a) dzbar
  int dim() const { return static_cast<int>(dz.size()); }
  bool is_real(double tol = 1e-12) const;
  double max_abs() const;
  OneFormValue operator+(const OneFormValue& o) const;
  OneFormValue operator-(const OneFormValue& o) const;
  OneFormValue operator*(double s) const;
};

/// Value of a 2-form: (2,0) part sum_{l<j} p20(l,j) dz_l^dz_j, (1,1) part
/// sum h11(l,j) (i/2) dz_l^dzbar_j, (0,2) part sum_{l<j} p02(l,j) dzbar_l^dzbar_j.
/// p20 and p02 are stored as full antisymmetric matrices.
struct TwoFormValue {
  Eigen::MatrixXcd p20;
  Eigen::MatrixXcd h11;
  Eigen::MatrixXcd p02;

  static TwoFormValue zero(int dim);
  static TwoFormValue from_hermitian(const Eigen::MatrixXcd& h);
  int dim() const { return static_cast<int>(h11.rows()); }
  double max_abs() const;
  double hermitian_residual() const;  // max |H - H^*|
  double min_eigenvalue() const;      // of the Hermitian part of h11
  bool positive_definite() const { return min_eigenvalue() > 0; }
  TwoFormValue operator+(const TwoFormValue& o) const;
  TwoFormValue operator-(const TwoFormValue& o) const;
  TwoFormValue operator*(double s) const;
};

// ---------------------------------------------------------------------------
// Fields

/// Real scalar field on one chart. `margin` is the distance from a point to
/// the boundary of the chart domain (unbounded when empty).
struct ScalarField {
  std::string name;
  int dim = 1;
  std::function<double(const Point&)> eval;
  std::function<double(const Point&)> margin;
};

struct OneFormField {
  std::string name;
  int dim = 1;
  std::function<OneFormValue(const Point&)> eval;
  std::function<double(const Point&)> margin;
  bool real = true;
};

struct TwoFormField {
  std::string name;
  int dim = 1;
  std::function<TwoFormValue(const Point&)> eval;
  std::function<double(const Point&)> margin;
};

/// Real components of a tensor field, for C^m grid norms.
struct ComponentField {
  std::string name;
  int dim = 1;
  std::function<Eigen::VectorXd(const Point&)> eval;
};

/// Throws NumericalError("point-too-close-to-chart-boundary") when the margin
/// at p is below 2h.
void require_margin(const std::function<double(const Point&)>& margin, const Point& p, double h);

// ---------------------------------------------------------------------------
// Operators

OneFormValue d_operator(const ScalarField& f, const Point& p, const FdSteps& steps = {});
TwoFormValue d_operator(const OneFormField& theta, const Point& p, const FdSteps& steps = {});

/// theta^c: dz -> -i dz, dzbar -> i dzbar.
OneFormValue conjugate_form(const OneFormValue& theta);
OneFormField conjugate_field(const OneFormField& theta);

/// d^c theta = -d(theta^c).
TwoFormValue dc_operator(const OneFormField& theta, const Point& p, const FdSteps& steps = {});

/// (i/2) ddbar f, i.e. H_{lj} = d^2 f / dz_l dzbar_j.
TwoFormValue ddbar_potential(const ScalarField& f, const Point& p, const FdSteps& steps = {});

TwoFormValue wedge(const OneFormValue& a, const OneFormValue& b);

/// Pointwise inner product of real 1-forms w.r.t. the Hermitian metric whose
/// Kahler form has matrix h (in (i/2) dz^dzbar units).
double form_inner(const OneFormValue& a, const OneFormValue& b, const Eigen::MatrixXcd& h);
double form_norm_sq(const OneFormValue& a, const Eigen::MatrixXcd& h);

/// Coefficient of d d-bar of a (1,1)-form on a complex surface, relative to
/// dz1^dz2^dzbar1^dzbar2, computed by FD of the form's Hermitian matrix.
cplx ddbar_of_two_form(const FieldFn<Eigen::MatrixXcd>& h, const Point& p, double h_step, bool richardson);

// ---------------------------------------------------------------------------
// Atlases

enum class BaseKind { ProjectiveSpace, WeightedLine };

struct BasePoint {
  int chart = 0;
  Point w;
};

class ChartAtlas {
 public:
  static ChartAtlas projective(int n);
  static ChartAtlas weighted_line(int a, int b);

  BaseKind kind() const { return kind_; }
  int dimension() const { return dim_; }
  int num_charts() const { return dim_ + 1; }
  /// Homogeneous weights (all ones for CP^n).
  const std::vector<int>& weights() const { return weights_; }
  int stabilizer_order(int chart) const { return weights_.at(static_cast<std::size_t>(chart)); }
  bool is_orbifold() const;
  bool is_cp1() const { return kind_ == BaseKind::ProjectiveSpace && dim_ == 1; }
  double domain_radius() const { return 2.0; }

  /// Homogeneous point (in C^{n+1}) of chart coordinates w with fiber value c:
  /// z_chart = c^{a_chart}, z_i = c^{a_i} w_i otherwise.
  Point lift(int chart, const Point& w, cplx c = 1.0) const;
  /// Chart coordinates and fiber value of a homogeneous point, or nullopt if
  /// the point is outside the chart. Uses the principal root for c.
  std::optional<std::pair<Point, cplx>> to_chart(int chart, const Point& z) const;
  Point transition(int from, int to, const Point& w) const;
  /// True if w1 and w2 are the same point of the chart's quotient by its
  /// stabilizer group.
  bool same_orbifold_point(int chart, const Point& w1, const Point& w2, double tol) const;

  /// Chordal distance between the base points of two homogeneous vectors
  /// (weighted lines use the isomorphism [z0^b : z1^a]).
  double base_distance(const Point& z1, const Point& z2) const;

  std::function<double(const Point&)> chart_margin() const;
  std::string describe() const;

 private:
  BaseKind kind_ = BaseKind::ProjectiveSpace;
  int dim_ = 1;
  std::vector<int> weights_;
};

/// Chordal distance of [u], [v] in CP^N: sqrt(1 - |<u,v>|^2 / (|u|^2 |v|^2)).
double projective_distance(const Eigen::VectorXcd& u, const Eigen::VectorXcd& v);

// ---------------------------------------------------------------------------
// Grids

struct GridSpec {
  int radial = 41;
  int angular = 64;
  // total-space sweeps (fiber samples times a coarser base lattice)
  int residual_radial = 9;
  int residual_angular = 12;
  int fiber_radial = 2;
  int fiber_angular = 2;
  double exclusion_radius = 0.05;
  FdSteps fd{};
  FdSteps norm_fd{1e-2, 2e-2, 2e-2, true};
};

struct GridPoint {
  int chart = 0;
  Point coords;
};

/// Per-chart polar lattice on |w| <= 1 (tensor lattice in dimension > 1),
/// excluding a disc around orbifold points.
std::vector<GridPoint> base_grid(const ChartAtlas& atlas, int radial, int angular, double exclusion_radius);
std::vector<GridPoint> base_grid(const ChartAtlas& atlas, const GridSpec& spec);
/// Base lattice (residual resolution) times fiber samples; coords are (w, c).
std::vector<GridPoint> total_grid(const ChartAtlas& atlas, const GridSpec& spec);

/// Supremum over points of the components and their real chart derivatives
/// up to order m (chart-wise C^m norm).
double cm_grid_norm(const ComponentField& field, std::span<const Point> points, int m, const FdSteps& steps);
/// Chart-wise version: per_chart[c] is the field's expression in chart c.
double cm_grid_norm(const std::vector<ComponentField>& per_chart, std::span<const GridPoint> points, int m,
                    const FdSteps& steps);

// ---------------------------------------------------------------------------
// Sweeps

void set_default_jobs(int jobs);
int default_jobs();

/// Runs body(i) for i in [0, n) on up to `jobs` threads. Callers store
/// per-index results and reduce in index order.
template <class Body>
void parallel_for(std::size_t n, Body&& body, int jobs = default_jobs()) {
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> threads;
  const std::size_t nj = static_cast<std::size_t>(jobs);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::size_t t = 0; t < nj; ++t) {
    threads.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += nj) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace vaislab
