#include "vaislab/convergence.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

namespace vaislab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Chart in which |z_c|^{1/a_c} is largest, and the chart coordinates there.
std::pair<int, Point> best_chart(const ChartAtlas& atlas, const Point& z) {
  int best = 0;
  double size = -1;
  for (int c = 0; c < atlas.num_charts(); ++c) {
    const double s = std::pow(std::abs(z(c)), 1.0 / atlas.stabilizer_order(c));
    if (s > size) {
      size = s;
      best = c;
    }
  }
  const auto loc = atlas.to_chart(best, z);
  if (!loc) throw NumericalError("zero-fiber-vector", "point of the zero section");
  return {best, loc->first};
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double total_volume(const ChartAtlas& atlas) {
  double v = kPi;
  if (atlas.dimension() != 1) throw std::invalid_argument("volume: curves only");
  for (int a : atlas.weights()) v /= a;
  return v;
}

}  // namespace

VaismanStructure induced_structure(const KodairaMapData& data, const ContractionSpec& contraction) {
  const KodairaMapData d = data;
  std::ostringstream name;
  name << "induced(k=" << data.k << ")";
  VaismanStructure s = VaismanStructure::from_log_potential(
      data.bundle, contraction,
      [d](const Point& z) {
        const auto [chart, w] = best_chart(d.bundle.atlas(), z);
        return std::log(bergman_kernel(d.bundle, d.basis, chart, w)) + d.k * d.bundle.log_t2(z);
      },
      name.str());
  s.set_q(std::pow(contraction.q, data.k));
  return s;
}

VaismanStructure pulled_back_target(const KodairaMapData& data, const ContractionSpec& contraction) {
  const KodairaMapData d = data;
  const TargetHopf target = extend_contraction(data, contraction);
  std::ostringstream name;
  name << "phi_" << data.k << "^*(target)";
  VaismanStructure s = VaismanStructure::from_log_potential(
      data.bundle, contraction,
      [d, target](const Point& z) { return target_log_potential(target, cone_immersion(d, z)); }, name.str());
  s.set_q(std::pow(contraction.q, data.k));
  return s;
}

VaismanStructure normalize_by_homothety(const VaismanStructure& induced, int k) {
  if (k < 1) throw std::invalid_argument("normalize_by_homothety: k must be positive");
  VaismanStructure s = sigma_homothety(induced, 1.0 / k);
  s.set_name("Sigma_1/" + std::to_string(k) + "(" + induced.name() + ")");
  return s;
}

BasicFunction closure_datum(const KodairaMapData& data) {
  const KodairaMapData d = data;
  const double scale = total_volume(data.bundle.atlas()) / (data.N + 1);
  return {"closure datum k=" + std::to_string(data.k), [d, scale](const Point& z) {
            const auto [chart, w] = best_chart(d.bundle.atlas(), z);
            return std::log(scale * bergman_kernel(d.bundle, d.basis, chart, w)) / (2.0 * d.k);
          }};
}

Jet2 log_bergman_jet(const KodairaMapData& data, int chart, cplx w) {
  if (data.bundle.atlas().dimension() != 1) throw std::invalid_argument("log_bergman_jet: curves only");
  const int other = 1 - chart;
  const auto& exps = data.basis.exponents;
  const auto n = static_cast<Eigen::Index>(exps.size());
  Eigen::VectorXcd m(n), m1(n), m2(n);
  for (Eigen::Index p = 0; p < n; ++p) {
    const int e = exps[static_cast<std::size_t>(p)][static_cast<std::size_t>(other)];
    const cplx we2 = e >= 2 ? std::pow(w, e - 2) : cplx(0);
    const cplx we1 = e >= 1 ? (e >= 2 ? we2 * w : cplx(1)) : cplx(0);
    m(p) = e >= 1 ? we1 * w : cplx(1);
    m1(p) = static_cast<double>(e) * we1;
    m2(p) = static_cast<double>(e) * (e - 1) * we2;
  }
  const Eigen::MatrixXcd ct = data.basis.coeffs.transpose();
  const Eigen::VectorXcd s0 = ct * m, s1 = ct * m1, s2 = ct * m2;
  // holomorphic sigma: sigma_x = sigma', sigma_y = i sigma'
  const double A = s0.squaredNorm(), Q = s1.squaredNorm();
  const cplx P = s0.dot(s1), R = s0.dot(s2);
  Jet2 S;
  S.v = A;
  S.x = 2 * P.real();
  S.y = -2 * P.imag();
  S.xx = 2 * (Q + R.real());
  S.xy = -2 * R.imag();
  S.yy = 2 * (Q - R.real());
  return log(S) - Jet2(data.k) * data.bundle.psi_jet(chart, w);
}

std::vector<ComponentField> difference_fields(const KodairaMapData& data) {
  std::vector<ComponentField> out;
  const KodairaMapData d = data;
  for (int c = 0; c < data.bundle.atlas().num_charts(); ++c) {
    ComponentField f;
    f.name = "(theta_k - theta, omega_0k - omega_0)";
    f.dim = 1;
    f.eval = [d, c](const Point& p) {
      const Jet2 j = log_bergman_jet(d, c, p(0));
      Eigen::VectorXd v(3);
      v << -j.x / d.k, -j.y / d.k, (j.xx + j.yy) / d.k;
      return v;
    };
    out.push_back(std::move(f));
  }
  return out;
}

std::array<double, 3> cm_distances(const KodairaMapData& data, const GridSpec& spec, int m_max) {
  const auto grid = base_grid(data.bundle.atlas(), spec);
  const auto fields = difference_fields(data);
  std::vector<std::array<double, 3>> local(grid.size());
  const FdSteps& st = spec.norm_fd;
  parallel_for(grid.size(), [&](std::size_t i) {
    const auto& g = grid[i];
    const FieldFn<Eigen::VectorXd> fn = fields[static_cast<std::size_t>(g.chart)].eval;
    auto& r = local[i];
    r = {fn(g.coords).cwiseAbs().maxCoeff(), 0.0, 0.0};
    if (m_max >= 1) {
      for (const auto& v : real_gradient(fn, g.coords, fd_step(st.first, g.coords), st.richardson)) {
        r[1] = std::max(r[1], v.cwiseAbs().maxCoeff());
      }
    }
    if (m_max >= 2) {
      for (const auto& v : real_hessian(fn, g.coords, fd_step(st.second, g.coords), st.richardson).entries) {
        r[2] = std::max(r[2], v.cwiseAbs().maxCoeff());
      }
    }
  });
  std::array<double, 3> D{0, 0, 0};
  for (const auto& r : local) {
    for (std::size_t m = 0; m < 3; ++m) D[m] = std::max(D[m], r[m]);
  }
  D[1] = std::max(D[1], D[0]);
  D[2] = std::max(D[2], D[1]);
  for (int m = m_max + 1; m < 3; ++m) D[static_cast<std::size_t>(m)] = kNaN;
  return D;
}

double lee_period_difference(const VaismanStructure& s1, const VaismanStructure& s2, int chart, cplx w, double r,
                             int points, const FdSteps& steps) {
  cplx sum = 0;
  for (int i = 0; i < points; ++i) {
    const cplx c = std::polar(r, 2 * kPi * (i + 0.5) / points);
    Point p(2);
    p << w, c;
    const OneFormValue d = s1.theta(chart, p, steps) - s2.theta(chart, p, steps);
    const cplx v = cplx(0, 1) * c;  // d/dphi of c e^{i phi}
    sum += d.dz(1) * v + d.dzbar(1) * std::conj(v);
  }
  return std::abs(sum) * 2 * kPi / points;
}

// ---------------------------------------------------------------------------

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0) || !std::isfinite(y[i])) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return kNaN;
  const double den = n * sxx - sx * sx;
  if (den == 0) return kNaN;
  return (n * sxy - sx * sy) / den;
}

void ConvergenceReport::write_csv(std::ostream& os) const {
  os << "k,N_k,D0,D1,D2,slope0,slope1,slope2,pass\n";
  for (const auto& r : rows) {
    os << r.k << ',' << r.N;
    for (double d : r.D) os << ',' << fmt(d);
    for (double s : slope) os << ',' << fmt(s);
    os << ',' << (pass ? "true" : "false") << '\n';
  }
}

ConvergenceReport convergence_study(const HermitianBundle& bundle, const std::vector<int>& k_list, int m_max,
                                    const ConvergenceCriteria& criteria, const StudyOptions& options,
                                    std::string experiment) {
  if (m_max < 0 || m_max > 2) throw std::invalid_argument("convergence_study: m_max must be 0, 1 or 2");
  if (k_list.empty()) throw std::invalid_argument("convergence_study: empty k list");
  for (std::size_t i = 0; i < k_list.size(); ++i) {
    if (k_list[i] < 1 || (i > 0 && k_list[i] <= k_list[i - 1])) {
      throw std::invalid_argument("convergence_study: k list must be positive and strictly increasing");
    }
  }
  ConvergenceReport rep;
  rep.experiment = std::move(experiment);
  rep.bundle = bundle.describe();
  rep.m_max = m_max;
  rep.criteria = criteria;

  const auto rule = make_quadrature(bundle, options.radial, options.angular);
  std::optional<QuadratureRule> alt;
  if (options.resolution_check) alt = make_quadrature(bundle, options.radial + 16, options.angular + 32);

  for (int k : k_list) {
    const auto t0 = std::chrono::steady_clock::now();
    ConvergenceRow row;
    row.k = k;
    row.D = {kNaN, kNaN, kNaN};
    try {
      if (alt) {
        check_quadrature_resolution(bundle, section_basis(bundle.atlas(), k), k, rule, *alt, options.resolution_tol);
      }
      const auto data = make_kodaira_data(bundle, k, rule);
      row.N = data.N;
      row.D = cm_distances(data, options.grid, m_max);
    } catch (const NumericalError& e) {
      row.error = e.what();
      rep.failures.push_back("k=" + std::to_string(k) + " aborted: " + e.what());
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.rows.push_back(std::move(row));
  }

  for (std::size_t m = 0; m < 3; ++m) {
    std::vector<double> xs, ys;
    for (const auto& r : rep.rows) {
      if (r.error.empty() && r.k >= criteria.window_lo && r.k <= criteria.window_hi) {
        xs.push_back(r.k);
        ys.push_back(r.D[m]);
      }
    }
    rep.slope[m] = static_cast<int>(m) <= m_max ? loglog_slope(xs, ys) : kNaN;
    bool dec = static_cast<int>(m) <= m_max;
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& r : rep.rows) {
      if (!r.error.empty() || r.k < criteria.monotone_from) continue;
      if (!(r.D[m] < prev)) dec = false;
      prev = r.D[m];
    }
    rep.decreasing[m] = dec;
    if (criteria.slope_max[m]) {
      if (!(rep.slope[m] <= *criteria.slope_max[m])) {
        rep.failures.push_back("slope" + std::to_string(m) + " = " + fmt(rep.slope[m]) + " > " +
                               fmt(*criteria.slope_max[m]));
      }
    }
    if (criteria.strictly_decreasing[m] && !dec) {
      rep.failures.push_back("D" + std::to_string(m) + " is not strictly decreasing for k >= " +
                             std::to_string(criteria.monotone_from));
    }
  }
  rep.pass = rep.failures.empty();
  return rep;
}

}  // namespace vaislab
