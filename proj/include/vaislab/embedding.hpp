#pragma once

// Kodaira maps of L^k, the cone immersion phi_k : L^{-1} \ {0} -> C^{N+1} \ {0},
// the extended contraction Gamma and the target Hopf manifold.
//
// With orthonormal sections sigma = C^T m (m the monomials), a point of the
// cone with homogeneous coordinates z maps to phi_k(z) = C^T m(z), which is
// homogeneous of degree k under the weighted C^* action. Hence
//   |phi_k(z)|^2 = B_k(x) (t^2)^k.

#include <optional>
#include <string>
#include <vector>

#include "vaislab/line_bundle.hpp"
#include "vaislab/vaisman.hpp"

namespace vaislab {

struct KodairaMapData {
  HermitianBundle bundle;
  SectionBasis basis;
  int k = 0;
  int N = 0;                 // target CP^N (basis size N + 1)
  std::vector<int> weights;  // 1 for manifold bases, the weighted degree k on orbifold bases

  bool weighted() const { return bundle.atlas().is_orbifold(); }
};

/// Orthonormal-section data for L^k. On orbifold bases this is the weighted
/// Kodaira map and checks for base points (NumericalError("base-point")).
KodairaMapData make_kodaira_data(const HermitianBundle& bundle, int k, const QuadratureRule& rule);
/// Same as make_kodaira_data; documents intent for weighted lines.
KodairaMapData weighted_kodaira_map(const HermitianBundle& bundle, int k, const QuadratureRule& rule);

/// Orthonormal sections at a base point in the chart frame (a representative
/// of the projective image). Throws NumericalError("base-point") on the zero vector.
Eigen::VectorXcd kodaira_map(const KodairaMapData& data, int chart, const Point& w);
Eigen::VectorXcd kodaira_map(const KodairaMapData& data, int chart, cplx w);

/// phi_k on homogeneous coordinates; throws NumericalError("zero-fiber-vector").
Eigen::VectorXcd cone_immersion(const KodairaMapData& data, const Point& z);
/// d/dw of the chart-frame section vector (exact monomial derivative, one-dimensional bases).
Eigen::VectorXcd kodaira_derivative(const KodairaMapData& data, int chart, cplx w);

struct PullbackCheck {
  double flat = 0;     // |phi_k(z)|^2
  double bergman = 0;  // B_k(x) h^{-k}(v, v)
  double relative = 0;
};
/// Squared flat norm of the image against B_k(x) h^{-k}(v,v), v = (w, c) in a chart.
PullbackCheck fs_pullback_norm(const KodairaMapData& data, int chart, const Point& w, cplx c);
/// tau = |phi_k|^2 pulled back, against B_k(x) (t^2)^k.
PullbackCheck induced_cone_coordinate(const KodairaMapData& data, int chart, const Point& w, cplx c);

struct TargetHopf {
  int dim = 0;                   // N + 1
  Eigen::VectorXcd gamma;        // diagonal of Gamma
  double q = 0;                  // largest eigenvalue modulus
  std::vector<double> exponents; // r_j = log|gamma_j| / log q
  bool regular = false;          // Gamma is a scalar multiple of the identity
  bool quasi_regular = false;    // every r_j is rational

  /// Throws NumericalError("not-a-contraction") unless 0 < |gamma_j| < 1.
  static TargetHopf from_eigenvalues(const Eigen::VectorXcd& gamma);
};

/// Gamma with phi_k o gamma = Gamma o phi_k. Throws
/// NumericalError("contraction-not-extendable") if the orthonormal basis mixes
/// monomials on which gamma acts differently.
TargetHopf extend_contraction(const KodairaMapData& data, const ContractionSpec& contraction);

/// Cone potential log t_T^2 of the target: log F with sum |Z_j|^2 F^{-r_j} = 1.
double target_log_potential(const TargetHopf& target, const Point& Z);
/// Vaisman structure on C^{N+1} \ {0} with contraction Gamma.
VaismanStructure target_structure(const TargetHopf& target);

/// Deterministic cone samples (chart, w, c) for identity checks.
struct ConeSample {
  int chart = 0;
  Point w;
  cplx c;
};
std::vector<ConeSample> random_cone_samples(const ChartAtlas& atlas, int count, unsigned long long seed);

/// sup |phi_k(gamma z) - Gamma phi_k(z)| / |Gamma phi_k(z)|.
double equivariance_residual(const KodairaMapData& data, const TargetHopf& target,
                             const ContractionSpec& contraction, const std::vector<ConeSample>& samples);
/// sup of the chordal distance between [phi_k(z)] and psi_k([z]) evaluated in
/// the chart where z is largest.
double commuting_square_residual(const KodairaMapData& data, const std::vector<ConeSample>& samples);
/// sup of the relative pullback-identity difference.
double pullback_identity_residual(const KodairaMapData& data, const std::vector<ConeSample>& samples);

struct EmbeddingReport {
  int k = 0;
  int N = 0;
  std::vector<int> weights;
  bool injective = false;
  bool immersive = false;
  double min_separation = 0;  // smallest image distance among base-separated grid pairs
  double min_immersion = 0;   // smallest relative transverse derivative
  double pullback_identity_residual = 0;
  double equivariance_residual = 0;
  double commuting_square_residual = 0;
};

/// Numerical embedding certificate: pairwise injectivity on the base grid
/// (pairs more than 1e-6 apart must map more than 1e-8 apart), immersivity at
/// grid points, and the identity residuals at `samples` random cone points.
EmbeddingReport certify_embedding(const KodairaMapData& data, const ContractionSpec& contraction,
                                  const GridSpec& spec = {}, int samples = 100, unsigned long long seed = 1);

}  // namespace vaislab
