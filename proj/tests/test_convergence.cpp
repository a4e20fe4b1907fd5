#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "vaislab/convergence.hpp"

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

GridSpec coarse() {
  GridSpec g;
  g.radial = 11;
  g.angular = 16;
  g.residual_radial = 4;
  g.residual_angular = 6;
  return g;
}

const HermitianBundle& pert() {
  static const HermitianBundle b(ChartAtlas::projective(1), 0.1);
  return b;
}

const QuadratureRule& pert_rule() {
  static const QuadratureRule r = make_quadrature(pert());
  return r;
}

}  // namespace

TEST_CASE("log Bergman jet against finite differences of B_k") {
  const auto d = make_kodaira_data(pert(), 8, pert_rule());
  for (int chart : {0, 1}) {
    for (cplx w : {cplx(0, 0), cplx(0.4, -0.7), cplx(1.3, 0.2)}) {
      const Jet2 j = log_bergman_jet(d, chart, w);
      auto f = [&](double dx, double dy) { return std::log(bergman_kernel(pert(), d.basis, chart, w + cplx(dx, dy))); };
      const double h = 1e-3;
      CHECK(j.v == doctest::Approx(f(0, 0)).epsilon(1e-12));
      CHECK(j.x == doctest::Approx((f(h, 0) - f(-h, 0)) / (2 * h)).epsilon(1e-5));
      CHECK(j.y == doctest::Approx((f(0, h) - f(0, -h)) / (2 * h)).epsilon(1e-5));
      const double lap = (f(h, 0) + f(-h, 0) + f(0, h) + f(0, -h) - 4 * f(0, 0)) / (h * h);
      CHECK(std::abs(j.xx + j.yy - lap) <= 1e-4 * std::max(1.0, std::abs(lap)));
      const double xy = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h);
      CHECK(std::abs(j.xy - xy) <= 1e-4 * std::max(1.0, std::abs(xy)));
    }
  }
}

TEST_CASE("Fubini-Study is balanced: D_k vanishes") {
  const HermitianBundle fs(ChartAtlas::projective(1));
  const auto rule = make_quadrature(fs);
  for (int k : {1, 4, 12}) {
    CAPTURE(k);
    const auto d = make_kodaira_data(fs, k, rule);
    CHECK(log_bergman_jet(d, 0, cplx(0.3, 0.3)).v == doctest::Approx(std::log((k + 1) / kPi)).epsilon(1e-12));
    for (double v : cm_distances(d, coarse())) CHECK(v <= 1e-8);
  }
}

TEST_CASE("induced structures") {
  const GridSpec spec = coarse();
  const ContractionSpec cs{0.5, {}};
  const HermitianBundle fs(ChartAtlas::projective(1));
  const auto ref = VaismanStructure::from_bundle(fs, cs);

  // k = 1 on FS: potential log(2/pi) + log t^2
  const auto d1 = make_kodaira_data(fs, 1, make_quadrature(fs));
  const auto s1 = induced_structure(d1, cs);
  CHECK(s1.log_t2(0, pt2(0.2, 0.9)) == doctest::Approx(std::log(2 / kPi) + ref.log_t2(0, pt2(0.2, 0.9))));
  CHECK(field_distance(s1, ref, spec) <= 1e-8);
  CHECK(field_distance(normalize_by_homothety(s1, 1), s1, spec) == 0.0);

  // the induced potential is the pullback of the target potential
  const auto d = make_kodaira_data(pert(), 10, pert_rule());
  const auto ind = induced_structure(d, cs);
  const auto pb = pulled_back_target(d, cs);
  CHECK(ind.q() == doctest::Approx(std::pow(0.5, 10)));
  double worst = 0;
  for (const auto& g : ind.samples(spec)) {
    const double a = ind.log_t2(g.chart, g.coords), b = pb.log_t2(g.chart, g.coords);
    worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
  }
  CHECK(worst <= 1e-12);
  CHECK(field_distance(ind, pb, spec) <= 1e-7);
  const auto id = vaisman_identity_residual(ind, spec);
  CHECK(id.value <= 1e-5);
  for (const auto& r : automorphy_residuals(ind, spec)) CHECK_MESSAGE(r.pass, r.check);
}

TEST_CASE("normalization is a type II deformation by the closure datum") {
  const GridSpec spec = coarse();
  const ContractionSpec cs{0.5, {}};
  const auto ref = VaismanStructure::from_bundle(pert(), cs);
  const auto d = make_kodaira_data(pert(), 10, pert_rule());
  const auto norm = normalize_by_homothety(induced_structure(d, cs), 10);
  CHECK(norm.q() == doctest::Approx(0.5));
  const auto deformed = type_II_deformation(ref, closure_datum(d), spec);
  CHECK(field_distance(norm, deformed, spec) <= 1e-8);
  // the Lee class is unchanged: zero period over the fiber circle
  for (cplx w : {cplx(0, 0), cplx(0.7, -0.2)}) CHECK(lee_period_difference(norm, ref, 0, w, 0.8) <= 1e-8);
  // and the reference itself is recovered by Sigma_{1/k} o Sigma_k
  CHECK(field_distance(sigma_homothety(sigma_homothety(ref, 7.0), 1.0 / 7.0), ref, spec) <= 1e-8);
}

TEST_CASE("jet differences match the structure fields") {
  const ContractionSpec cs{0.5, {}};
  const auto ref = VaismanStructure::from_bundle(pert(), cs);
  const auto d = make_kodaira_data(pert(), 10, pert_rule());
  const auto norm = normalize_by_homothety(induced_structure(d, cs), 10);
  const auto fields = difference_fields(d);
  for (cplx w : {cplx(0.1, 0.2), cplx(-0.8, 0.5)}) {
    const Point p = pt2(w, cplx(0.9, 0.1));
    const Eigen::VectorXd comp = fields[0].eval(pt(w));
    const OneFormValue dth = norm.theta(0, p) - ref.theta(0, p);
    // real 1-form -delta_x dx - delta_y dy has dw-component (-delta_x + i delta_y) / 2 ... as comp = (-dx, -dy)
    CHECK(std::abs(dth.dz(0) - 0.5 * cplx(comp(0), -comp(1))) <= 1e-6);
    CHECK(std::abs(dth.dz(1)) <= 1e-6);
    const Eigen::MatrixXcd dw0 = norm.omega0_from_potential(0, p).h11 - ref.omega0_from_potential(0, p).h11;
    CHECK(std::abs(dw0(0, 0) - comp(2)) <= 1e-5);
  }
}

TEST_CASE("property: D_k is invariant under rescaling h") {
  const HermitianBundle scaled(ChartAtlas::projective(1), 0.1, 0.7);
  const auto a = cm_distances(make_kodaira_data(pert(), 6, pert_rule()), coarse());
  const auto b = cm_distances(make_kodaira_data(scaled, 6, make_quadrature(scaled)), coarse());
  for (std::size_t m = 0; m < 3; ++m) CHECK(std::abs(a[m] - b[m]) <= 1e-10);
}

TEST_CASE("cm_distances agrees with the C^m grid norm") {
  const auto d = make_kodaira_data(pert(), 5, pert_rule());
  const GridSpec g = coarse();
  const auto D = cm_distances(d, g);
  const auto grid = base_grid(d.bundle.atlas(), g);
  const auto fields = difference_fields(d);
  for (int m = 0; m < 3; ++m) {
    CHECK(D[static_cast<std::size_t>(m)] == cm_grid_norm(fields, grid, m, g.norm_fd));
  }
  const auto d0 = cm_distances(d, g, 0);
  CHECK(d0[0] == D[0]);
  CHECK(std::isnan(d0[1]));
}

TEST_CASE("log-log slope") {
  std::vector<double> k, y;
  for (int i = 5; i <= 40; i += 5) {
    k.push_back(i);
    y.push_back(3.0 * std::pow(i, -2.0));
  }
  CHECK(loglog_slope(k, y) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(std::isnan(loglog_slope({5}, {1.0})));
}

TEST_CASE("convergence study: report, determinism and errors") {
  ConvergenceCriteria cr;
  cr.slope_max[0] = -1.0;
  cr.strictly_decreasing[0] = true;
  cr.window_lo = 5;
  cr.window_hi = 20;
  StudyOptions opt;
  opt.grid = coarse();
  const std::vector<int> ks{5, 10, 20};
  const auto r1 = convergence_study(pert(), ks, 2, cr, opt);
  const auto r2 = convergence_study(pert(), ks, 2, cr, opt);
  std::ostringstream c1, c2;
  r1.write_csv(c1);
  r2.write_csv(c2);
  CHECK(c1.str() == c2.str());
  CHECK(c1.str().rfind("k,N_k,D0,D1,D2,slope0,slope1,slope2,pass\n", 0) == 0);
  CHECK(r1.pass);
  CHECK(r1.decreasing[0]);
  CHECK(r1.slope[0] <= -1.0);
  for (const auto& row : r1.rows) CHECK(row.N == row.k);

  CHECK_THROWS_AS(convergence_study(pert(), {5, 5}, 2, cr, opt), std::invalid_argument);
  CHECK_THROWS_AS(convergence_study(pert(), {5}, 3, cr, opt), std::invalid_argument);

  // a four-node rule cannot resolve k = 20
  StudyOptions tiny = opt;
  tiny.radial = 4;
  tiny.angular = 8;
  const auto bad = convergence_study(pert(), {20}, 0, cr, tiny);
  CHECK(!bad.rows[0].error.empty());
  CHECK(std::isnan(bad.rows[0].D[0]));
  CHECK(!bad.pass);
}
