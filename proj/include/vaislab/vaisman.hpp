#pragma once

// Vaisman structures on Hopf-type quotients of L^{-1} \ {0}.
//
// A structure is described on cone charts. For a structure built from a
// bundle, chart c of the base gives the total-space chart p = (w, c_fib),
// mapped to homogeneous coordinates by ChartAtlas::lift; for a target Hopf
// manifold the single chart is C^{N+1} \ {0} itself. In potential mode the
// structure is the function log t^2 on homogeneous coordinates and
//   Omega = (i/2) ddbar t^2,  omega = t^{-2} Omega,  theta = -d log t^2,
//   omega_0 = d^c theta.
// With these conventions |theta|_omega = 2 for every cone potential, and
// omega = (d^c theta + theta ^ theta^c) / |theta|^2 holds exactly.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vaislab/geometry.hpp"
#include "vaislab/line_bundle.hpp"

namespace vaislab {

/// gamma = phi x q: z_j -> q^{a_j} exp(2 pi i phase_j) z_j. Phases are in
/// turns and must be rational (finite order).
struct ContractionSpec {
  double q = 0.5;
  std::vector<double> phase_turns;  // empty = identity

  /// Throws std::invalid_argument for q outside (0,1) or phases of infinite order.
  void validate(int num_coords) const;
  /// Order of phi (1 for the identity).
  long order() const;
  /// Diagonal of gamma on homogeneous coordinates with weights a_j.
  Eigen::VectorXcd homogeneous_diagonal(const std::vector<int>& weights) const;
  double phase(std::size_t j) const { return j < phase_turns.size() ? phase_turns[j] : 0.0; }
};

/// Degree-0 function on homogeneous coordinates (a function on the base).
struct BasicFunction {
  std::string name;
  std::function<double(const Point& z)> eval;
};

/// One chart of the cone. `to_homogeneous` is empty for structures whose
/// chart is C^{N+1} itself; explicit-mode structures carry theta/omega.
struct ConeChart {
  int dim = 2;
  std::function<Point(const Point&)> to_homogeneous;
  Eigen::VectorXcd gamma;  // gamma acts on chart coordinates as p -> gamma .* p
  std::function<double(const Point&)> margin;
  std::function<OneFormValue(const Point&)> theta;  // explicit mode only
  std::function<TwoFormValue(const Point&)> omega;  // explicit mode only
};

struct ResidualRecord {
  std::string check;
  std::string grid;
  double value = 0;
  double tolerance = 0;
  bool pass = false;
};

class VaismanStructure {
 public:
  enum class Mode { Potential, Explicit };

  /// Potential-mode structure over a bundle: log t^2 = bundle.log_t2 on C^{n+1}.
  static VaismanStructure from_bundle(const HermitianBundle& bundle, const ContractionSpec& contraction);
  /// Potential-mode structure over the base of `bundle` with an arbitrary log
  /// potential (no validation; used for induced and deliberately broken inputs).
  static VaismanStructure from_log_potential(const HermitianBundle& bundle, const ContractionSpec& contraction,
                                             std::function<double(const Point& z)> log_t2, std::string name);
  /// Potential-mode structure on C^m \ {0} with diagonal contraction gamma.
  static VaismanStructure on_vector_space(int m, const Eigen::VectorXcd& gamma,
                                          std::function<double(const Point& z)> log_t2, std::string name);
  /// Explicit-mode structure sharing the charts of `base`.
  static VaismanStructure explicit_fields(const VaismanStructure& base, std::vector<ConeChart> charts,
                                          std::string name);

  Mode mode() const { return mode_; }
  const std::string& name() const { return name_; }
  int num_charts() const { return static_cast<int>(charts_.size()); }
  const ConeChart& chart(int c) const { return charts_.at(static_cast<std::size_t>(c)); }
  const std::vector<ConeChart>& charts() const { return charts_; }
  double q() const { return q_; }
  int b1() const { return b1_; }
  const std::optional<HermitianBundle>& bundle() const { return bundle_; }
  const ContractionSpec& contraction() const { return contraction_; }
  bool normalized_by_construction() const { return normalized_; }
  /// True if log t^2 is the bundle's own potential (exact jets available).
  bool uses_bundle_potential() const { return bundle_potential_; }
  /// log t^2 on homogeneous coordinates (potential mode).
  const std::function<double(const Point&)>& log_potential() const { return log_t2_; }

  // Pointwise fields on chart c at chart point p.
  double log_t2(int c, const Point& p) const;
  double t2(int c, const Point& p) const { return std::exp(log_t2(c, p)); }
  ScalarField log_t2_field(int c) const;
  ScalarField t2_field(int c) const;
  OneFormValue theta(int c, const Point& p, const FdSteps& steps = {}) const;
  OneFormField theta_field(int c, const FdSteps& steps = {}) const;
  TwoFormValue cone_form(int c, const Point& p, const FdSteps& steps = {}) const;
  TwoFormValue omega(int c, const Point& p, const FdSteps& steps = {}) const;
  /// omega_0 = d^c theta, nested differences (outer step = steps.nested).
  TwoFormValue omega0(int c, const Point& p, const FdSteps& steps = {}) const;
  /// omega_0 from the potential in one differentiation: H = 4 (log t^2)_{l jbar}.
  TwoFormValue omega0_from_potential(int c, const Point& p, const FdSteps& steps = {}) const;

  /// Sample points of the cone charts: total-space grid for bundle
  /// structures, deterministic shells in C^m otherwise.
  std::vector<GridPoint> samples(const GridSpec& spec) const;
  std::string grid_label(const GridSpec& spec) const;

  /// |theta|_omega at the first sample point, computed once.
  double lee_norm_constant(const GridSpec& spec = {}) const;

  void set_b1(int b1) { b1_ = b1; }
  void set_q(double q) { q_ = q; }
  void set_normalized(bool n) { normalized_ = n; }
  void set_name(std::string n) { name_ = std::move(n); }

 private:
  Mode mode_ = Mode::Potential;
  std::string name_;
  std::vector<ConeChart> charts_;
  std::function<double(const Point&)> log_t2_;
  std::optional<HermitianBundle> bundle_;
  ContractionSpec contraction_;
  double q_ = 0.5;
  int b1_ = 1;
  bool normalized_ = false;
  int vector_space_dim_ = 0;
  bool bundle_potential_ = false;

  struct Cache;
  std::shared_ptr<Cache> cache_;
};

/// t = |v|_{h^{-1}} = |c| exp(psi(w)/2); throws NumericalError("zero-fiber-vector").
double cone_coordinate(const HermitianBundle& bundle, int chart, const Point& w, cplx c);
/// t on homogeneous coordinates.
double cone_coordinate(const HermitianBundle& bundle, const Point& z);

/// Builds the structure of a positive bundle and contraction, checking
/// positivity of omega_X, automorphy of t^2 and positivity of omega.
VaismanStructure vaisman_from_cone(const HermitianBundle& bundle, const ContractionSpec& contraction,
                                   const GridSpec& spec = {});

struct IdentityResidual {
  double value = 0;          // sup |omega - (d^c theta + theta ^ theta^c)/|theta|^2|
  double lee_norm_mean = 0;  // mean of |theta|_omega
  double lee_norm_variance = 0;
};
IdentityResidual vaisman_identity_residual(const VaismanStructure& s, const GridSpec& spec = {});

struct TransverseCheck {
  double constant = 0;      // omega_0 = constant * pi^* omega_X
  double max_rel_dev = 0;   // sup |omega_0 - constant pi^* omega_X| / |constant pi^* omega_X|
  double kernel_ratio = 0;  // sup of |lambda_min| / lambda_max of omega_0
  double lee_in_kernel = 0; // sup |omega_0(theta^#, .)| / (|omega_0| |theta^#|)
};
/// Throws NumericalError("transverse-kernel-dimension") if omega_0 does not
/// have a two-real-dimensional kernel at some sample.
TransverseCheck transverse_form_check(const VaismanStructure& s, const GridSpec& spec = {},
                                      double kernel_tol = 1e-6);

/// sup |ddbar omega| on a complex surface (cone of a curve).
double gauduchon_residual(const VaismanStructure& s, const GridSpec& spec = {});

/// gamma^* t^2 = q^2 t^2, gamma^* Omega = q^2 Omega, gamma^* omega = omega,
/// gamma^* theta = theta (relative residuals over samples).
std::vector<ResidualRecord> automorphy_residuals(const VaismanStructure& s, const GridSpec& spec = {},
                                                 double tol = 1e-8);

/// sup |d theta| (nested differences) and sup |d omega_0| (omega_0 from the potential).
double lee_closedness_residual(const VaismanStructure& s, const GridSpec& spec = {});
double transverse_closedness_residual(const VaismanStructure& s, const GridSpec& spec = {});

/// Sigma_a: t -> t^a (log t^2 -> a log t^2).
VaismanStructure sigma_homothety(const VaismanStructure& s, double a);

/// theta' = a theta + alpha, omega' = d^c theta' + theta' ^ theta'^c. alpha is
/// given per chart (empty = zero). Checks, in order: closedness, pointwise
/// orthogonality to theta and theta^c, codifferential, and the b1 = 1 obstruction.
VaismanStructure type_I_deformation(const VaismanStructure& s, double a, const std::vector<OneFormField>& alpha,
                                    const GridSpec& spec = {}, double tol = 1e-6);

/// t -> e^f t for a basic f. Throws NumericalError("transverse-form-not-positive")
/// unless omega_X + i ddbar f > 0 on the base grid.
VaismanStructure type_II_deformation(const VaismanStructure& s, const BasicFunction& f, const GridSpec& spec = {});

struct TypeIIReport {
  double lee_relation = 0;  // sup |theta~ - (theta - 2 df)|
  double class_relative = 0;  // |int omega~_X - int omega_X| / int omega_X
  double volume_before = 0;
  double volume_after = 0;
};
TypeIIReport verify_type_II(const VaismanStructure& before, const VaismanStructure& after, const BasicFunction& f,
                            const GridSpec& spec = {}, int radial = 64, int angular = 128);

/// Pointwise field difference sup |omega_1 - omega_2| + |theta_1 - theta_2| on samples.
double field_distance(const VaismanStructure& s1, const VaismanStructure& s2, const GridSpec& spec = {});
/// Same for omega_1 against a scalar multiple of omega_2 and theta_1 against theta_2.
double field_distance_scaled(const VaismanStructure& s1, const VaismanStructure& s2, double omega_scale,
                             const GridSpec& spec = {});

// ---------------------------------------------------------------------------
// Rational approximation of the Lee class

struct LeeClassCoords {
  std::vector<double> coords;  // [theta] in the lattice basis
  int b1 = 1;
};

struct LeeApproximant {
  std::vector<long long> numerators;
  long long denominator = 1;
  double a = 1;               // coefficient of [theta]
  std::vector<double> alpha;  // remainder [alpha_t]
  double error = 0;           // max coordinate error
};

/// Continued-fraction convergents p/q of x with q <= max_den.
std::vector<std::pair<long long, long long>> convergents(double x, long long max_den);

/// Common-denominator schedule over the coordinates' convergents; stops when
/// the error drops to tol or the next denominator exceeds max_den. Exactly
/// rational input returns the single exact class (a = 1, alpha = 0).
std::vector<LeeApproximant> rational_lee_approximation(const LeeClassCoords& coords, double tol,
                                                       long long max_den = 1000000);

}  // namespace vaislab
