#pragma once

// Positive Hermitian line (orbi)bundles over CP^1 and weighted projective
// lines, monomial section spaces of L^k, L^2 Gram matrices and Bergman kernels.
//
// The bundle is described by the squared dual norm t^2 on the total space of
// L^{-1} minus the zero section, realised as C^{n+1}\{0}:
//   t^2(z) = F(z) exp(eps U(z) - log_scale),
// where F is the weighted Fubini-Study cone potential (the positive root of
// sum_j |z_j|^2 F^{-a_j} = 1; F = |z|^2 for unit weights) and U is a bounded
// weighted-invariant perturbation. In chart c the local potential is
// psi_c(w) = log t^2(lift(w, 1)), the frame has |e|_h^2 = exp(-psi_c), and the
// curvature form is omega_X = (i/2) ddbar psi_c. With this normalisation
// the Fubini-Study volume of CP^1 is pi.

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "vaislab/geometry.hpp"
#include "vaislab/jet.hpp"

namespace vaislab {

/// Mixed: U = Re(z0^b conj(z1)^a) / F^{ab} + 0.3 (|z0|^2/F^a - |z1|^2/F^b),
/// which breaks every symmetry. Radial: only the second term, which keeps
/// the circle action w -> e^{is} w.
enum class Perturbation { Mixed, Radial };

class HermitianBundle {
 public:
  explicit HermitianBundle(ChartAtlas atlas, double epsilon = 0.0, double log_scale = 0.0,
                           Perturbation kind = Perturbation::Mixed);

  const ChartAtlas& atlas() const { return atlas_; }
  double epsilon() const { return epsilon_; }
  double log_scale() const { return log_scale_; }
  Perturbation perturbation_kind() const { return kind_; }

  /// log t^2 on C^{n+1}\{0}.
  double log_t2(const Point& z) const;
  /// The perturbation U (weighted-invariant, bounded).
  double perturbation(const Point& z) const;

  double psi(int chart, const Point& w) const;
  double psi(int chart, cplx w) const;
  /// Exact second-order jet of psi in (Re w, Im w); one-dimensional bases only.
  Jet2 psi_jet(int chart, cplx w) const;
  /// Component of omega_X in (i/2) dw^dwbar units, from the exact jet.
  double volume_density(int chart, cplx w) const;

  ScalarField potential(int chart) const;

  /// Throws NumericalError("bundle-not-positive") if omega_X is not positive
  /// at some grid point.
  void check_positive(std::span<const GridPoint> grid) const;

  std::string describe() const;

 private:
  ChartAtlas atlas_;
  double epsilon_;
  double log_scale_;
  Perturbation kind_;
};

/// omega_X = (i/2) ddbar psi on each chart, by finite differences.
std::vector<TwoFormField> curvature_form(const HermitianBundle& bundle, const FdSteps& steps = {});

// ---------------------------------------------------------------------------

struct QuadratureNode {
  int chart = 0;
  cplx w;
  double area_weight = 0;    // Lebesgue measure in the chart, divided by the stabilizer order
  double volume_weight = 0;  // omega_X^n / n!, divided by the stabilizer order
};

struct QuadratureRule {
  std::vector<QuadratureNode> nodes;
  int radial = 0;
  int angular = 0;
  std::string scheme;
  /// Largest k for which Fubini-Study Gram integrands are integrated exactly.
  int max_exact_power = 0;

  double volume() const;
};

/// CP^1: substitution u = |w|^2/(1+|w|^2) in chart 0, Gauss-Legendre in u
/// times the trapezoid rule in angle. Weighted lines: unit discs of both
/// uniformizing charts, Gauss-Legendre in |w|^2, each divided by its
/// stabilizer order.
QuadratureRule make_quadrature(const HermitianBundle& bundle, int radial = 64, int angular = 128);

/// Gauss-Legendre nodes and weights on [0, 1].
void gauss_legendre_unit(int n, std::vector<double>& nodes, std::vector<double>& weights);

// ---------------------------------------------------------------------------

using Exponent = std::vector<int>;

/// Monomial basis of H^0(X, L^k), in descending lexicographic order.
/// CP^n: exponent tuples summing to k. Weighted line (a,b): (i,j) with ai+bj = k.
std::vector<Exponent> section_basis(const ChartAtlas& atlas, int k);

/// Monomials evaluated in a chart frame (the fiber factor c^k omitted).
Eigen::VectorXcd monomials(const ChartAtlas& atlas, const std::vector<Exponent>& exps, int chart, const Point& w);
/// m_p(w) exp(-k psi(w) / 2), evaluated in log space.
Eigen::VectorXcd scaled_sections(const HermitianBundle& bundle, const std::vector<Exponent>& exps, int k,
                                 int chart, const Point& w);

/// G[p][q] = int conj(m_p) m_q h^k dV, conjugate-symmetrized.
Eigen::MatrixXcd gram_matrix(const HermitianBundle& bundle, const std::vector<Exponent>& exps, int k,
                             const QuadratureRule& rule);

/// C = (L^*)^{-1} for G = L L^*, so that C^* G C = I.
Eigen::MatrixXcd orthonormalize(const Eigen::MatrixXcd& gram);

/// Throws NumericalError("quadrature-under-resolved") if the Gram matrices
/// from two rules differ by more than tol relative to sqrt(G_pp G_qq).
double check_quadrature_resolution(const HermitianBundle& bundle, const std::vector<Exponent>& exps, int k,
                                   const QuadratureRule& rule, const QuadratureRule& alt, double tol = 1e-8);

struct SectionBasis {
  int k = 0;
  std::vector<Exponent> exponents;
  Eigen::MatrixXcd gram;
  Eigen::MatrixXcd coeffs;  // orthonormal section j = sum_p coeffs(p, j) m_p

  int size() const { return static_cast<int>(exponents.size()); }
};

/// Throws NumericalError("empty-section-space") when H^0(X, L^k) has no monomials.
SectionBasis make_section_basis(const HermitianBundle& bundle, int k, const QuadratureRule& rule);

/// B_k(x) = sum_j h^k(s_j(x), s_j(x)) over the orthonormal basis. Chart
/// coordinates are uniformizing coordinates; with uniformizing_cover = false,
/// points within `exclusion` of an orbifold point are rejected.
double bergman_kernel(const HermitianBundle& bundle, const SectionBasis& basis, int chart, const Point& w,
                      bool uniformizing_cover = true, double exclusion = 0.05);
double bergman_kernel(const HermitianBundle& bundle, const SectionBasis& basis, int chart, cplx w);

/// Row-major CSV, complex entries written as re,im pairs.
void write_gram_csv(std::ostream& os, const Eigen::MatrixXcd& gram);

}  // namespace vaislab
