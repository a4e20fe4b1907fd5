#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "vaislab/embedding.hpp"

using namespace vaislab;

namespace {

Point pt(cplx w) {
  Point p(1);
  p << w;
  return p;
}

Point pt2(cplx a, cplx b) {
  Point p(2);
  p << a, b;
  return p;
}

double fs_gram_oracle(int k, int j) { return kPi * std::beta(j + 1.0, k - j + 1.0); }

const QuadratureRule& fs_rule() {
  static const QuadratureRule r = make_quadrature(HermitianBundle(ChartAtlas::projective(1)));
  return r;
}

GridSpec small_grid() {
  GridSpec g;
  g.residual_radial = 4;
  g.residual_angular = 6;
  return g;
}

}  // namespace

TEST_CASE("Kodaira map of the Fubini-Study line, k = 2") {
  const HermitianBundle fs(ChartAtlas::projective(1));
  const auto d = make_kodaira_data(fs, 2, fs_rule());
  CHECK(d.N == 2);
  CHECK(d.weights == std::vector<int>{1, 1, 1});
  const auto a = kodaira_map(d, 0, 0.0);  // [1:0]
  CHECK(projective_distance(a, Eigen::Vector3cd(1, 0, 0)) < 1e-12);
  const auto b = kodaira_map(d, 1, 0.0);  // [0:1]
  CHECK(projective_distance(b, Eigen::Vector3cd(0, 0, 1)) < 1e-12);
  // [1:1]: orthonormal monomials are m_j / |m_j|
  const auto c = kodaira_map(d, 0, 1.0);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(c(j)) == doctest::Approx(1.0 / std::sqrt(fs_gram_oracle(2, j))).epsilon(1e-10));
  }
}

TEST_CASE("cone immersion") {
  const HermitianBundle fs(ChartAtlas::projective(1));
  const auto d3 = make_kodaira_data(fs, 3, fs_rule());
  const Point z = pt2(cplx(0.3, 0.7), cplx(-1.1, 0.2));
  // exact homogeneity: phi(2 z) = 8 phi(z)
  CHECK(cone_immersion(d3, 2.0 * z) == 8.0 * cone_immersion(d3, z));
  CHECK_THROWS_AS(cone_immersion(d3, pt2(0.0, 0.0)), NumericalError);

  // k = 1 on the flat cone: phi_1(z) = z / sqrt(pi B(1, 2)) = sqrt(2/pi) z
  const auto d1 = make_kodaira_data(fs, 1, fs_rule());
  CHECK((cone_immersion(d1, z) - std::sqrt(2 / kPi) * z).norm() <= 1e-12);

  // projectivization equals the Kodaira map
  const auto pts = random_cone_samples(fs.atlas(), 100, 7);
  CHECK(commuting_square_residual(d3, pts) <= 1e-10);
}

TEST_CASE("property: pullback identity |phi_k|^2 = B_k h^{-k}") {
  const std::vector<HermitianBundle> bundles{HermitianBundle(ChartAtlas::projective(1)),
                                             HermitianBundle(ChartAtlas::projective(1), 0.1),
                                             HermitianBundle(ChartAtlas::weighted_line(1, 2))};
  for (const auto& b : bundles) {
    CAPTURE(b.describe());
    const auto rule = make_quadrature(b);
    const auto pts = random_cone_samples(b.atlas(), 100, 11);
    for (int k : {2, 6, 12, 20}) {
      CAPTURE(k);
      const auto d = make_kodaira_data(b, k, rule);
      CHECK(pullback_identity_residual(d, pts) <= 1e-10);
      CHECK(commuting_square_residual(d, pts) <= 1e-10);
    }
  }
}

TEST_CASE("pullback norm values") {
  const HermitianBundle fs(ChartAtlas::projective(1));
  const auto d1 = make_kodaira_data(fs, 1, fs_rule());
  // h^{-1}(v, v) = |c|^2 (1 + |w|^2) = 1
  const cplx w(0.4, -0.3);
  const cplx c = std::polar(1.0 / std::sqrt(1 + std::norm(w)), 0.7);
  const auto r = fs_pullback_norm(d1, 0, pt(w), c);
  CHECK(r.flat == doctest::Approx(2 / kPi).epsilon(1e-10));
  CHECK(r.relative <= 1e-10);

  const auto d2 = make_kodaira_data(fs, 2, fs_rule());
  const auto a = fs_pullback_norm(d2, 0, pt(w), c);
  const auto b = fs_pullback_norm(d2, 0, pt(w), 2.0 * c);
  CHECK(b.flat == doctest::Approx(16 * a.flat).epsilon(1e-13));
  CHECK_THROWS_AS(fs_pullback_norm(d2, 0, pt(w), 0.0), NumericalError);
}

TEST_CASE("induced cone coordinate") {
  const HermitianBundle fs(ChartAtlas::projective(1));
  const auto d1 = make_kodaira_data(fs, 1, fs_rule());
  // flat cone: tau(z) = (2/pi) |z|^2
  const Point w = pt(cplx(0.2, 0.9));
  const cplx c(0.6, -0.5);
  const Point z = fs.atlas().lift(0, w, c);
  const auto tau = induced_cone_coordinate(d1, 0, w, c);
  CHECK(tau.flat == doctest::Approx(2 / kPi * z.squaredNorm()).epsilon(1e-10));
  CHECK(tau.relative <= 1e-10);
  // on t = 1, tau = B_k(x)
  const HermitianBundle pert(ChartAtlas::projective(1), 0.1);
  const auto rule = make_quadrature(pert);
  const auto d5 = make_kodaira_data(pert, 5, rule);
  const cplx c1 = 1.0 / cone_coordinate(pert, 0, w, 1.0);
  CHECK(induced_cone_coordinate(d5, 0, w, c1).flat ==
        doctest::Approx(bergman_kernel(pert, d5.basis, 0, w)).epsilon(1e-10));
}

TEST_CASE("extending the contraction") {
  const HermitianBundle fs(ChartAtlas::projective(1));
  const auto d2 = make_kodaira_data(fs, 2, fs_rule());
  const auto t = extend_contraction(d2, ContractionSpec{0.5, {}});
  CHECK((t.gamma - Eigen::VectorXcd::Constant(3, 0.25)).norm() < 1e-15);
  CHECK(t.regular);
  CHECK(t.quasi_regular);

  // phases (0, 1/4) act on z0^{2-j} z1^j by i^j
  const HermitianBundle radial(ChartAtlas::projective(1), 0.1, 0, Perturbation::Radial);
  const auto rule = make_quadrature(radial);
  const auto dr = make_kodaira_data(radial, 2, rule);
  const ContractionSpec cs{0.5, {0.0, 0.25}};
  const auto tr = extend_contraction(dr, cs);
  const Eigen::Vector3cd oracle(0.25, cplx(0, 0.25), -0.25);
  CHECK((tr.gamma - oracle).norm() < 1e-15);
  CHECK(!tr.regular);
  const auto pts = random_cone_samples(radial.atlas(), 100, 3);
  CHECK(equivariance_residual(dr, tr, cs, pts) <= 1e-10);

  // the mixed perturbation couples monomials with different characters
  const HermitianBundle mixed(ChartAtlas::projective(1), 0.1);
  const auto dm = make_kodaira_data(mixed, 2, make_quadrature(mixed));
  CHECK_THROWS_AS(extend_contraction(dm, cs), NumericalError);
}

TEST_CASE("weighted Kodaira maps") {
  const HermitianBundle w12(ChartAtlas::weighted_line(1, 2));
  const auto rule = make_quadrature(w12);
  const auto d2 = weighted_kodaira_map(w12, 2, rule);
  CHECK(d2.basis.exponents == std::vector<Exponent>{{2, 0}, {0, 1}});
  CHECK(d2.weights == std::vector<int>{2, 2});
  const auto rep = certify_embedding(d2, ContractionSpec{0.5, {}}, small_grid());
  CHECK(rep.injective);
  CHECK(rep.immersive);
  CHECK(rep.pullback_identity_residual <= 1e-10);
  CHECK(rep.equivariance_residual <= 1e-10);

  try {
    weighted_kodaira_map(w12, 1, rule);
    FAIL("expected base-point");
  } catch (const NumericalError& e) {
    CHECK(e.check() == "base-point");
    CHECK(std::string(e.what()).find("chart 1") != std::string::npos);
  }

  // gamma = diag(q, q^2), k = 4: every monomial z0^i z1^j has i + 2j = 4
  const auto d4 = weighted_kodaira_map(w12, 4, rule);
  const auto t4 = extend_contraction(d4, ContractionSpec{0.5, {}});
  CHECK((t4.gamma - Eigen::VectorXcd::Constant(d4.N + 1, 0.0625)).norm() < 1e-15);

  // equal weights reduce to the ordinary Kodaira map
  const HermitianBundle w11(ChartAtlas::weighted_line(1, 1));
  const auto rule11 = make_quadrature(w11);
  const auto a = weighted_kodaira_map(w11, 3, rule11);
  const auto b = make_kodaira_data(w11, 3, rule11);
  CHECK(a.weights == std::vector<int>(4, 1));
  CHECK(kodaira_map(a, 0, cplx(0.3, 0.1)) == kodaira_map(b, 0, cplx(0.3, 0.1)));
}

TEST_CASE("property: Kodaira maps are embeddings") {
  const HermitianBundle fs(ChartAtlas::projective(1), 0.1);
  const auto rule = make_quadrature(fs);
  for (int k : {1, 3, 8}) {
    CAPTURE(k);
    const auto rep = certify_embedding(make_kodaira_data(fs, k, rule), ContractionSpec{0.5, {}}, small_grid());
    CHECK(rep.injective);
    CHECK(rep.immersive);
    CHECK(rep.commuting_square_residual <= 1e-10);
    CHECK(rep.equivariance_residual <= 1e-10);
  }
}

TEST_CASE("target Hopf manifolds") {
  const GridSpec spec = small_grid();
  const auto reg = TargetHopf::from_eigenvalues(Eigen::VectorXcd::Constant(3, 0.25));
  CHECK(reg.regular);
  const auto sr = target_structure(reg);
  CHECK(vaisman_identity_residual(sr, spec).value <= 1e-5);
  for (const auto& r : automorphy_residuals(sr, spec)) CHECK_MESSAGE(r.pass, r.check);

  const auto qr = TargetHopf::from_eigenvalues(Eigen::Vector2cd(0.5, 0.25));
  CHECK(qr.quasi_regular);
  CHECK(!qr.regular);
  CHECK(qr.exponents[1] == doctest::Approx(2.0));
  const auto sq = target_structure(qr);
  CHECK(vaisman_identity_residual(sq, spec).value <= 1e-5);
  for (const auto& r : automorphy_residuals(sq, spec)) CHECK_MESSAGE(r.pass, r.check);
  // sum |Z_j|^2 F^{-r_j} = 1 at (1, 1): F + F^2 ... with r = (1, 2): 1/F + 1/F^2 = 1
  const double golden = (1 + std::sqrt(5.0)) / 2;
  CHECK(target_log_potential(qr, pt2(1.0, 1.0)) == doctest::Approx(std::log(golden)).epsilon(1e-14));

  const auto irr = TargetHopf::from_eigenvalues(Eigen::Vector2cd(0.5, std::pow(0.5, kPi)));
  CHECK(!irr.quasi_regular);
  CHECK_THROWS_AS(TargetHopf::from_eigenvalues(Eigen::Vector2cd(0.5, 1.0)), NumericalError);
}
