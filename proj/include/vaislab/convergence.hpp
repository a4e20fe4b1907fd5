#pragma once

// Induced Vaisman structures phi_k^* of the target Hopf structure, their
// Sigma_{1/k} normalizations, and C^m distances to the reference structure.
//
// The induced cone potential is log |phi_k|^2 = log B_k + k log t^2, so the
// normalized structure has potential log t^2 + delta_k with delta_k = (1/k) log B_k,
// a basic function. Its differences to the reference are
//   Lee form:        theta_k - theta = -d delta_k,
//   transverse form: omega_0,k - omega_0 = (delta_xx + delta_yy) (i/2) dw ^ dwbar,
// and D_k^{(m)} is the chart-wise C^m norm of (-delta_x, -delta_y, delta_xx + delta_yy)
// on the base grid.

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vaislab/embedding.hpp"
#include "vaislab/jet.hpp"

namespace vaislab {

/// Structure with cone potential log B_k(x) + k log t^2 and contraction factor q^k.
VaismanStructure induced_structure(const KodairaMapData& data, const ContractionSpec& contraction);
/// The same structure computed as the pullback of the target potential along phi_k.
VaismanStructure pulled_back_target(const KodairaMapData& data, const ContractionSpec& contraction);
/// Sigma_{1/k}.
VaismanStructure normalize_by_homothety(const VaismanStructure& induced, int k);

/// f_k = (1/(2k)) log(Vol B_k / (N_k + 1)): the normalized structure is the
/// type II deformation of the reference by f_k, up to a constant.
BasicFunction closure_datum(const KodairaMapData& data);

/// Exact second-order jet of log B_k in the real chart coordinates (one-dimensional bases).
Jet2 log_bergman_jet(const KodairaMapData& data, int chart, cplx w);

/// The difference components (-delta_x, -delta_y, delta_xx + delta_yy) in each chart.
std::vector<ComponentField> difference_fields(const KodairaMapData& data);

/// D^{(0)}, D^{(1)}, D^{(2)} on the base grid in one sweep (C^m norms are cumulative).
std::array<double, 3> cm_distances(const KodairaMapData& data, const GridSpec& spec = {}, int m_max = 2);

/// Period of theta_1 - theta_2 over the fiber circle |c| = r above chart point w.
double lee_period_difference(const VaismanStructure& s1, const VaismanStructure& s2, int chart, cplx w, double r,
                             int points = 64, const FdSteps& steps = {});

// ---------------------------------------------------------------------------

struct ConvergenceCriteria {
  std::array<std::optional<double>, 3> slope_max;  // fitted slope must not exceed this
  std::array<bool, 3> strictly_decreasing{false, false, false};
  int monotone_from = 5;  // decrease is required for k >= this
  int window_lo = 5;      // slope-fit window
  int window_hi = 40;
};

struct ConvergenceRow {
  int k = 0;
  int N = 0;
  std::array<double, 3> D{};  // NaN for aborted rows
  double seconds = 0;
  std::string error;          // non-empty if this k was aborted
};

struct ConvergenceReport {
  std::string experiment;
  std::string bundle;
  int m_max = 2;
  std::vector<ConvergenceRow> rows;
  std::array<double, 3> slope{};  // NaN when fewer than two window points
  std::array<bool, 3> decreasing{};
  ConvergenceCriteria criteria;
  bool pass = false;
  std::vector<std::string> failures;

  /// Columns k, N_k, D0, D1, D2, slope0, slope1, slope2, pass (%.17g numbers).
  void write_csv(std::ostream& os) const;
};

struct StudyOptions {
  int radial = 64;
  int angular = 128;
  bool resolution_check = true;  // compare Gram matrices against a finer rule
  double resolution_tol = 1e-8;
  GridSpec grid{};
};

/// Least-squares slope of log y against log x over positive finite points.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Builds the induced structures for every k and measures D_k^{(m)}, m <= m_max.
ConvergenceReport convergence_study(const HermitianBundle& bundle, const std::vector<int>& k_list, int m_max,
                                    const ConvergenceCriteria& criteria, const StudyOptions& options = {},
                                    std::string experiment = "convergence");

}  // namespace vaislab
