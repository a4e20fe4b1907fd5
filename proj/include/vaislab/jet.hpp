#pragma once

#include <cmath>

namespace vaislab {

// Second-order jet in two real variables (x, y). Used where exact chart
// derivatives of a potential are needed, e.g. quadrature volume densities.
struct Jet2 {
  double v = 0, x = 0, y = 0, xx = 0, xy = 0, yy = 0;

  Jet2() = default;
  Jet2(double c) : v(c) {}  // NOLINT: implicit constants are convenient in templates

  static Jet2 var_x(double x0) {
    Jet2 j(x0);
    j.x = 1;
    return j;
  }
  static Jet2 var_y(double y0) {
    Jet2 j(y0);
    j.y = 1;
    return j;
  }

  double laplacian() const { return xx + yy; }
};

inline double value_of(double d) { return d; }
inline double value_of(const Jet2& j) { return j.v; }

inline Jet2 operator+(const Jet2& a, const Jet2& b) {
  Jet2 r;
  r.v = a.v + b.v;
  r.x = a.x + b.x;
  r.y = a.y + b.y;
  r.xx = a.xx + b.xx;
  r.xy = a.xy + b.xy;
  r.yy = a.yy + b.yy;
  return r;
}
inline Jet2 operator-(const Jet2& a) {
  Jet2 r;
  r.v = -a.v;
  r.x = -a.x;
  r.y = -a.y;
  r.xx = -a.xx;
  r.xy = -a.xy;
  r.yy = -a.yy;
  return r;
}
inline Jet2 operator-(const Jet2& a, const Jet2& b) { return a + (-b); }
inline Jet2 operator*(const Jet2& a, const Jet2& b) {
  Jet2 r;
  r.v = a.v * b.v;
  r.x = a.x * b.v + a.v * b.x;
  r.y = a.y * b.v + a.v * b.y;
  r.xx = a.xx * b.v + 2 * a.x * b.x + a.v * b.xx;
  r.xy = a.xy * b.v + a.x * b.y + a.y * b.x + a.v * b.xy;
  r.yy = a.yy * b.v + 2 * a.y * b.y + a.v * b.yy;
  return r;
}

// h(a) given h(v), h'(v), h''(v)
inline Jet2 chain(const Jet2& a, double h0, double h1, double h2) {
  Jet2 r;
  r.v = h0;
  r.x = h1 * a.x;
  r.y = h1 * a.y;
  r.xx = h1 * a.xx + h2 * a.x * a.x;
  r.xy = h1 * a.xy + h2 * a.x * a.y;
  r.yy = h1 * a.yy + h2 * a.y * a.y;
  return r;
}

inline Jet2 reciprocal(const Jet2& a) {
  const double u = a.v;
  return chain(a, 1 / u, -1 / (u * u), 2 / (u * u * u));
}
inline Jet2 operator/(const Jet2& a, const Jet2& b) { return a * reciprocal(b); }

inline Jet2 exp(const Jet2& a) {
  const double e = std::exp(a.v);
  return chain(a, e, e, e);
}
inline Jet2 log(const Jet2& a) { return chain(a, std::log(a.v), 1 / a.v, -1 / (a.v * a.v)); }
inline Jet2 sqrt(const Jet2& a) {
  const double s = std::sqrt(a.v);
  return chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}

// Minimal complex number over a real scalar type (double or Jet2).
template <class S>
struct Cx {
  S re{}, im{};
};

template <class S>
Cx<S> cmul(const Cx<S>& a, const Cx<S>& b) {
  return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}
template <class S>
Cx<S> cconj(const Cx<S>& a) {
  return {a.re, -a.im};
}
template <class S>
S cnorm2(const Cx<S>& a) {
  return a.re * a.re + a.im * a.im;
}
template <class S>
Cx<S> cpow(const Cx<S>& a, int n) {
  Cx<S> r{S(1.0), S(0.0)};
  for (int i = 0; i < n; ++i) r = cmul(r, a);
  return r;
}

}  // namespace vaislab
