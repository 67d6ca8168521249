#include "qresp/auxcheck.hpp"

#include <cmath>
#include <stdexcept>

#include "qresp/liouville.hpp"

namespace qresp {

using namespace liouville;

namespace {

void check_lowering(const MatterModel& model, const Operator& j) {
  if (j.rows() != model.dim() || j.cols() != model.dim())
    throw std::invalid_argument("aux coupling J has wrong dimension");
  for (int r = 0; r < j.rows(); ++r)
    for (int c = 0; c < j.cols(); ++c)
      if (std::abs(j(r, c)) > 1e-14 && model.grade_of(r) != model.grade_of(c) - 1)
        throw std::invalid_argument("aux coupling J must lower the excitation grading");
}

}  // namespace

SuperOperator build_coupled(const MatterModel& model, const Operator& j, double chi) {
  if (chi <= 0) throw std::invalid_argument("build_coupled: chi must be positive");
  check_lowering(model, j);
  const int d = model.dim();
  const Operator im = Operator::Identity(d, d);
  Operator sm = Operator::Zero(2, 2);
  sm(0, 1) = 1.0;
  Operator h = kron(model.H, Operator::Identity(2, 2)) + kron(j, sm.adjoint()) +
               kron(j.adjoint(), sm);
  return lindblad_generator(h, {chi * kron(im, sm)});
}

SuperOperator effective_generator(const MatterModel& model, const Operator& j, double chi) {
  if (chi <= 0) throw std::invalid_argument("effective_generator: chi must be positive");
  return lindblad_generator(model.H, {(2.0 / chi) * j});
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  DensityMatrix diff = a - b;
  diff = 0.5 * (diff + diff.adjoint());
  Eigen::SelfAdjointEigenSolver<DensityMatrix> es(diff);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

DensityMatrix partial_trace_last(const DensityMatrix& rho, int sub_dim) {
  const int total = static_cast<int>(rho.rows());
  if (sub_dim < 1 || total % sub_dim != 0)
    throw std::invalid_argument("partial_trace_last: dimensions do not factor");
  const int d = total / sub_dim;
  DensityMatrix out = DensityMatrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int a = 0; a < sub_dim; ++a) out(i, j) += rho(i * sub_dim + a, j * sub_dim + a);
  return out;
}

EliminationReport compare_elimination(const MatterModel& model, const Operator& j_eff,
                                      const std::vector<double>& chis, const RealVector& times,
                                      const DensityMatrix& matter_initial) {
  EliminationReport report;
  report.times = times;
  const int d = model.dim();
  if (matter_initial.rows() != d)
    throw std::invalid_argument("compare_elimination: initial state has wrong dimension");

  DensityMatrix aux_ground = DensityMatrix::Zero(2, 2);
  aux_ground(0, 0) = 1.0;
  const VectorizedState v0_coupled = vectorize(kron(matter_initial, aux_ground));
  const VectorizedState v0_eff = vectorize(matter_initial);

  for (double chi : chis) {
    const Operator j = (chi / 2.0) * j_eff;
    const SuperOperator g_coupled = build_coupled(model, j, chi);
    const SuperOperator g_eff = lindblad_generator(model.H, {j_eff});

    std::vector<double> curve;
    curve.reserve(times.size());
    double worst = 0.0;
    VectorizedState vc = v0_coupled, ve = v0_eff;
    double prev_t = 0.0;
    for (Eigen::Index n = 0; n < times.size(); ++n) {
      const double t = times(n);
      if (t < prev_t) throw std::invalid_argument("compare_elimination: times must be ascending");
      vc = matrix_exponential(g_coupled, t - prev_t) * vc;
      ve = matrix_exponential(g_eff, t - prev_t) * ve;
      prev_t = t;
      const double err = trace_distance(partial_trace_last(devectorize(vc), 2), devectorize(ve));
      curve.push_back(err);
      worst = std::max(worst, err);
    }
    report.chis.push_back(chi);
    report.max_error.push_back(worst);
    report.curves.push_back(std::move(curve));
  }

  // Least-squares slope of log(max_error) against log(chi).
  if (report.chis.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (size_t i = 0; i < report.chis.size(); ++i) {
      if (report.max_error[i] <= 0) continue;
      const double x = std::log(report.chis[i]);
      const double y = std::log(report.max_error[i]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++cnt;
    }
    if (cnt >= 2) report.fitted_exponent = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  }
  return report;
}

EliminationReport compare_elimination_matched(const MatterModel& model,
                                              const std::vector<double>& chis,
                                              const RealVector& times,
                                              const DensityMatrix& matter_initial) {
  return compare_elimination(model, model.L, chis, times, matter_initial);
}

}  // namespace qresp
