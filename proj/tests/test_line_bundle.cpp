#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "vaislab/line_bundle.hpp"

using namespace vaislab;

namespace {

Point pt(cplx w) {
  Point p(1);
  p << w;
  return p;
}

// int_C |w|^{2j} (1+|w|^2)^{-(k+2)} dA = pi B(j+1, k-j+1)
double fs_gram_oracle(int k, int j) { return kPi * std::beta(j + 1.0, k - j + 1.0); }

double max_offdiag(const Eigen::MatrixXcd& g) {
  double m = 0;
  for (Eigen::Index p = 0; p < g.rows(); ++p) {
    for (Eigen::Index q = 0; q < g.cols(); ++q) {
      if (p != q) m = std::max(m, std::abs(g(p, q)));
    }
  }
  return m;
}

}  // namespace

TEST_CASE("section bases") {
  const auto cp1 = section_basis(ChartAtlas::projective(1), 2);
  CHECK(cp1 == std::vector<Exponent>{{2, 0}, {1, 1}, {0, 2}});
  // brute-force lattice enumeration
  for (auto [a, b, k] : {std::tuple{1, 2, 4}, std::tuple{2, 3, 1}, std::tuple{2, 3, 12}, std::tuple{3, 5, 30}}) {
    std::vector<Exponent> oracle;
    for (int i = k; i >= 0; --i) {
      for (int j = k; j >= 0; --j) {
        if (a * i + b * j == k) oracle.push_back({i, j});
      }
    }
    CHECK(section_basis(ChartAtlas::weighted_line(a, b), k) == oracle);
  }
  CHECK(section_basis(ChartAtlas::weighted_line(1, 2), 4) == std::vector<Exponent>{{4, 0}, {2, 1}, {0, 2}});
  CHECK(section_basis(ChartAtlas::weighted_line(2, 3), 1).empty());
  // C(n+k, n) monomials on CP^n
  CHECK(section_basis(ChartAtlas::projective(2), 3).size() == 10);
  CHECK(section_basis(ChartAtlas::projective(3), 2).size() == 10);
}

TEST_CASE("Gauss-Legendre rule integrates polynomials exactly") {
  std::vector<double> x, w;
  gauss_legendre_unit(16, x, w);
  for (int p = 0; p <= 31; ++p) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * std::pow(x[i], p);
    CHECK(std::abs(s - 1.0 / (p + 1)) < 1e-14);
  }
}

TEST_CASE("Fubini-Study curvature and volume") {
  const HermitianBundle fs(ChartAtlas::projective(1));
  CHECK(std::abs(fs.volume_density(0, 0.0) - 1.0) < 1e-14);
  const auto omega = curvature_form(fs);
  for (cplx w : {cplx(0.3, -0.2), cplx(0.9, 0.1)}) {
    const double oracle = 1.0 / std::pow(1 + std::norm(w), 2);
    CHECK(std::abs(omega[1].eval(pt(w)).h11(0, 0).real() - oracle) < 1e-14);
    // FD and jet densities agree
    CHECK(std::abs(ddbar_potential(fs.potential(0), pt(w)).h11(0, 0).real() - oracle) < 1e-9);
  }
  const auto rule = make_quadrature(fs);
  CHECK(std::abs(rule.volume() - kPi) / kPi < 1e-10);
  for (const auto& n : rule.nodes) CHECK(n.volume_weight > 0);

  const HermitianBundle zero_eps(ChartAtlas::projective(1), 0.0);
  CHECK(zero_eps.psi(0, cplx(0.4, 0.1)) == fs.psi(0, cplx(0.4, 0.1)));
}

TEST_CASE("perturbed and weighted volumes are cohomological") {
  for (double eps : {0.1, 0.2}) {
    const HermitianBundle b(ChartAtlas::projective(1), eps);
    CHECK(std::abs(make_quadrature(b).volume() - kPi) / kPi < 1e-9);
  }
  for (auto [a, bw] : {std::pair{1, 2}, std::pair{2, 3}}) {
    const HermitianBundle b(ChartAtlas::weighted_line(a, bw), 0.1);
    const double oracle = kPi / (a * bw);
    CHECK(std::abs(make_quadrature(b).volume() - oracle) / oracle < 1e-9);
  }
}

TEST_CASE("Gram matrix matches Beta integrals for k <= 20") {
  const HermitianBundle fs(ChartAtlas::projective(1));
  const auto rule = make_quadrature(fs);
  for (int k = 1; k <= 20; ++k) {
    const auto exps = section_basis(fs.atlas(), k);
    const auto g = gram_matrix(fs, exps, k, rule);
    double worst = 0;
    for (std::size_t p = 0; p < exps.size(); ++p) {
      const auto pp = static_cast<Eigen::Index>(p);
      const double o = fs_gram_oracle(k, exps[p][1]);
      worst = std::max(worst, std::abs(g(pp, pp) - o) / o);
    }
    CHECK(worst <= 1e-10);
    CHECK(max_offdiag(g) <= 1e-10 * g.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("radial perturbation keeps the Gram matrix diagonal") {
  const auto atlas = ChartAtlas::projective(1);
  const HermitianBundle fs(atlas);
  const int k = 3;
  const auto exps = section_basis(atlas, k);
  const auto g0 = gram_matrix(fs, exps, k, make_quadrature(fs));
  std::vector<double> shifts;
  for (double eps : {0.01, 0.02}) {
    const HermitianBundle b(atlas, eps, 0.0, Perturbation::Radial);
    const auto g = gram_matrix(b, exps, k, make_quadrature(b));
    CHECK(max_offdiag(g) <= 1e-12);
    shifts.push_back((g - g0).diagonal().cwiseAbs().maxCoeff());
  }
  CHECK(shifts[0] > 0);
  CHECK(shifts[1] / shifts[0] == doctest::Approx(2.0).epsilon(0.05));
  // the mixed perturbation couples neighbouring monomials
  const HermitianBundle mixed(atlas, 0.1);
  CHECK(max_offdiag(gram_matrix(mixed, exps, k, make_quadrature(mixed))) > 1e-4);
}

TEST_CASE("orthonormalize") {
  CHECK((orthonormalize(Eigen::MatrixXcd::Identity(3, 3)) - Eigen::MatrixXcd::Identity(3, 3)).norm() < 1e-15);
  Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(2, 2);
  d(0, 0) = 4;
  d(1, 1) = 1;
  const auto c = orthonormalize(d);
  CHECK(std::abs(c(0, 0) - 0.5) < 1e-15);
  CHECK(std::abs(c(1, 1) - 1.0) < 1e-15);
  CHECK(std::abs(c(0, 1)) + std::abs(c(1, 0)) < 1e-15);

  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXcd a(5, 5);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = cplx(nd(rng), nd(rng));
    const Eigen::MatrixXcd g = a * a.adjoint() + 0.5 * Eigen::MatrixXcd::Identity(5, 5);
    const auto cc = orthonormalize(g);
    CHECK((cc.adjoint() * g * cc - Eigen::MatrixXcd::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  Eigen::MatrixXcd bad = Eigen::MatrixXcd::Identity(2, 2);
  bad(1, 1) = -1;
  CHECK_THROWS_AS(orthonormalize(bad), NumericalError);
}

TEST_CASE("Fubini-Study Bergman kernels are constant (k+1)/pi") {
  const HermitianBundle fs(ChartAtlas::projective(1));
  const auto rule = make_quadrature(fs);
  const auto grid = base_grid(fs.atlas(), 11, 16, 0.05);
  for (int k : {1, 2, 5, 10, 20}) {
    const auto sb = make_section_basis(fs, k, rule);
    CHECK((sb.coeffs.adjoint() * sb.gram * sb.coeffs - Eigen::MatrixXcd::Identity(sb.size(), sb.size()))
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
    double lo = 1e300, hi = 0;
    for (const auto& g : grid) {
      const double b = bergman_kernel(fs, sb, g.chart, g.coords);
      lo = std::min(lo, b);
      hi = std::max(hi, b);
    }
    const double oracle = (k + 1) / kPi;  // N_k + 1 over the volume
    CHECK(hi - lo <= 1e-8 * oracle);
    CHECK(std::abs(hi - oracle) <= 1e-9 * oracle);
  }
  const auto b1 = make_section_basis(fs, 1, rule);
  CHECK(bergman_kernel(fs, b1, 0, cplx(0.3, 0.2)) == doctest::Approx(0.63662).epsilon(1e-5));
  const auto b2 = make_section_basis(fs, 2, rule);
  CHECK(bergman_kernel(fs, b2, 1, cplx(-0.5, 0.1)) == doctest::Approx(0.95493).epsilon(1e-5));
}

TEST_CASE("property: Bergman kernel integrates to the section count") {
  std::vector<HermitianBundle> bundles{HermitianBundle(ChartAtlas::projective(1), 0.15),
                                       HermitianBundle(ChartAtlas::weighted_line(1, 2), 0.1),
                                       HermitianBundle(ChartAtlas::weighted_line(2, 3), 0.1)};
  for (const auto& b : bundles) {
    const auto rule = make_quadrature(b);
    for (int k : {6, 12}) {
      const auto sb = make_section_basis(b, k, rule);
      double integral = 0;
      for (const auto& n : rule.nodes) integral += n.volume_weight * bergman_kernel(b, sb, n.chart, n.w);
      CHECK(std::abs(integral - sb.size()) <= 1e-8 * sb.size());
      // strictly positive away from orbifold points
      CHECK(bergman_kernel(b, sb, 0, cplx(0.5, 0.5)) > 0);
    }
  }
}

TEST_CASE("property: h^k norms of sections agree across charts") {
  std::vector<HermitianBundle> bundles{HermitianBundle(ChartAtlas::projective(1), 0.2),
                                       HermitianBundle(ChartAtlas::weighted_line(2, 3), 0.1)};
  for (const auto& b : bundles) {
    const int k = 12;
    const auto exps = section_basis(b.atlas(), k);
    for (cplx w : {cplx(0.7, 0.2), cplx(-0.4, 0.8)}) {
      const Point u = b.atlas().transition(0, 1, pt(w));
      const Eigen::VectorXd s0 = scaled_sections(b, exps, k, 0, pt(w)).cwiseAbs2();
      const Eigen::VectorXd s1 = scaled_sections(b, exps, k, 1, u).cwiseAbs2();
      CHECK(((s0 - s1).array() / s0.array()).abs().maxCoeff() <= 1e-8);
    }
  }
}

TEST_CASE("property: normalized Bergman density converges at rate 1/k") {
  const HermitianBundle b(ChartAtlas::projective(1), 0.15);
  const auto grid = base_grid(b.atlas(), 11, 16, 0.05);
  auto deviation = [&](int k, const QuadratureRule& rule) {
    const auto sb = make_section_basis(b, k, rule);
    double dev = 0;
    for (const auto& g : grid) {
      dev = std::max(dev, std::abs(kPi * bergman_kernel(b, sb, g.chart, g.coords) / sb.size() - 1));
    }
    return dev;
  };
  const auto rule = make_quadrature(b);
  double prev = 1e300;
  for (int k = 5; k <= 30; k += 5) {
    const double dev = deviation(k, rule);
    CHECK(dev < prev);
    prev = dev;
  }
  // the deviation behaves like C/(k + 7), so the rate is fitted on k >= 40
  const auto fine = make_quadrature(b, 128, 256);
  std::vector<double> lk, ld;
  for (int k : {40, 80, 160}) {
    lk.push_back(std::log(k));
    ld.push_back(std::log(deviation(k, fine)));
  }
  const double n = static_cast<double>(lk.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lk.size(); ++i) {
    sx += lk[i];
    sy += ld[i];
    sxx += lk[i] * lk[i];
    sxy += lk[i] * ld[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope <= -0.9);
  CHECK(slope >= -1.1);
}

TEST_CASE("quadrature resolution check") {
  const HermitianBundle b(ChartAtlas::projective(1), 0.1);
  const auto exps = section_basis(b.atlas(), 8);
  CHECK(check_quadrature_resolution(b, exps, 8, make_quadrature(b, 64, 128), make_quadrature(b, 128, 128)) <=
        1e-10);
  const auto big = section_basis(b.atlas(), 40);
  CHECK_THROWS_AS(check_quadrature_resolution(b, big, 40, make_quadrature(b, 8, 16), make_quadrature(b, 16, 32)),
                  NumericalError);
}

TEST_CASE("positivity and error paths") {
  const HermitianBundle ok(ChartAtlas::projective(1), 0.2);
  const auto grid = base_grid(ok.atlas(), GridSpec{});
  CHECK_NOTHROW(ok.check_positive(grid));
  const HermitianBundle bad(ChartAtlas::projective(1), 5.0);
  CHECK_THROWS_AS(bad.check_positive(grid), NumericalError);

  const HermitianBundle wl(ChartAtlas::weighted_line(2, 3));
  CHECK_THROWS_AS(make_section_basis(wl, 1, make_quadrature(wl)), NumericalError);
  const auto sb = make_section_basis(wl, 6, make_quadrature(wl));
  CHECK_THROWS_AS(bergman_kernel(wl, sb, 1, pt(0.01), false), NumericalError);
  CHECK(bergman_kernel(wl, sb, 1, pt(0.01), true) > 0);
  CHECK_THROWS_AS(make_quadrature(HermitianBundle(ChartAtlas::projective(2))), std::invalid_argument);
}

TEST_CASE("Gram CSV export") {
  Eigen::MatrixXcd g(2, 2);
  g << cplx(1, 0), cplx(0.5, -0.25), cplx(0.5, 0.25), cplx(2, 0);
  std::ostringstream os;
  write_gram_csv(os, g);
  CHECK(os.str() == "1,0,0.5,-0.25\n0.5,0.25,2,0\n");
}
