#include "qresp/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include "qresp/liouville.hpp"

namespace qresp {

using namespace liouville;

double Wavepacket::norm_defect() const {
  return std::abs(eps.squaredNorm() * dt - 1.0);
}

Wavepacket gaussian_wavepacket(double sigma_t, double t0, double t_start, double dt, int samples,
                               const std::function<void(const std::string&)>& warn) {
  if (sigma_t <= 0) throw std::invalid_argument("gaussian_wavepacket: sigma_t must be positive");
  if (dt <= 0 || samples < 2) throw std::invalid_argument("gaussian_wavepacket: bad grid");
  if (sigma_t < 2 * dt && warn)
    warn("gaussian_wavepacket: grid too coarse for sigma_t (sigma_t < 2 dt)");
  Wavepacket wp;
  wp.t_start = t_start;
  wp.dt = dt;
  wp.eps.resize(samples);
  for (int i = 0; i < samples; ++i) {
    const double x = wp.time_at(i) - t0;
    wp.eps(i) = std::exp(-x * x / (4.0 * sigma_t * sigma_t));
  }
  const double norm = wp.eps.squaredNorm() * dt;
  if (norm <= 0) throw std::invalid_argument("gaussian_wavepacket: vanishing profile on the grid");
  wp.eps /= std::sqrt(norm);
  return wp;
}

namespace {

struct GreensOperands {
  SuperOperator gen;        // damped continuum generator
  VectorizedState start;    // (rho_0 L) vectorized = sandwich(I, L^dag) vec(rho_0)
  SuperOperator raise_ket;  // sandwich(L^dag, I)
  RealVector readout;       // real diagonal readout functional
};

GreensOperands make_operands(const MatterModel& model) {
  GreensOperands ops;
  ops.gen = build_continuum_generator(model);
  const int d = model.dim();
  const Operator id = Operator::Identity(d, d);

  DensityMatrix rho0 = DensityMatrix::Zero(d, d);
  for (int a = 0; a < model.noise_dim; ++a)
    for (int b = 0; b < model.noise_dim; ++b)
      rho0(model.ground_state * model.noise_dim + a, model.ground_state * model.noise_dim + b) =
          model.noise_initial(a, b);

  ops.start = sandwich(id, model.L.adjoint()) * vectorize(rho0);
  ops.raise_ket = sandwich(model.L.adjoint(), id);
  ops.readout = RealVector::Zero(d * d);
  for (int k = 0; k < d; ++k)
    if (k / model.noise_dim == model.measured_state) ops.readout(k * d + k) = 1.0;
  return ops;
}

// Pairs the term with its Hermitian conjugate; the residue of the paired
// value must vanish for the value to be castable to a real response.
double paired_real(Complex z) {
  const Complex paired = z + std::conj(z);
  if (std::abs(paired.imag()) > 1e-9)
    throw std::runtime_error("greens: imaginary residue above 1e-9 (" +
                             std::to_string(paired.imag()) + ")");
  return paired.real();
}

}  // namespace

double greens_exact(const MatterModel& model, double t1, double t2) {
  if (t1 < 0 || t2 < 0) throw std::invalid_argument("greens_exact: negative time");
  GreensOperands ops = make_operands(model);
  VectorizedState v = matrix_exponential(ops.gen, t2) * ops.start;
  v = ops.raise_ket * v;
  v = matrix_exponential(ops.gen, t1) * v;
  const Complex val = ops.readout.cast<Complex>().dot(v);
  return paired_real(val);
}

GreensTable greens_table_exact(const MatterModel& model, double dt, double t_max_m,
                               double t_max_int, std::size_t max_bytes) {
  if (dt <= 0) throw std::invalid_argument("greens_table_exact: dt must be positive");
  const int m_count = static_cast<int>(std::floor(t_max_m / dt + 0.5)) + 1;
  const int k_count = static_cast<int>(std::floor(t_max_int / dt + 0.5)) + 1;
  const std::size_t need = 2ull * sizeof(double) * m_count * k_count;
  if (need > max_bytes)
    throw std::runtime_error("greens_table_exact: grid needs " + std::to_string(need) +
                             " bytes, budget is " + std::to_string(max_bytes));

  GreensOperands ops = make_operands(model);
  const SuperOperator step = matrix_exponential(ops.gen, dt);
  const int d2 = static_cast<int>(ops.gen.rows());

  // values(m,k) = readout^T P^m raise_ket P^k start: accumulate the
  // left rows and right columns once, then a single product.
  Eigen::MatrixXcd left(m_count, d2);   // rows: readout^T P^m raise_ket
  Eigen::MatrixXcd right(d2, k_count);  // cols: P^k start
  Eigen::RowVectorXcd row = ops.readout.cast<Complex>().transpose();
  for (int m = 0; m < m_count; ++m) {
    left.row(m) = row * ops.raise_ket;
    if (m + 1 < m_count) row = row * step;
  }
  VectorizedState col = ops.start;
  for (int k = 0; k < k_count; ++k) {
    right.col(k) = col;
    if (k + 1 < k_count) col = step * col;
  }
  Eigen::MatrixXcd vals = left * right;

  GreensTable table;
  table.dt = dt;
  table.source = "exact";
  table.values.resize(m_count, k_count);
  table.errors = RealMatrix::Zero(m_count, k_count);
  for (int m = 0; m < m_count; ++m)
    for (int k = 0; k < k_count; ++k)
      table.values(m, k) = paired_real(vals(m, k));
  return table;
}

namespace {

// Largest q with wp.dt == q * table.dt (within rounding), or 0.
int grid_ratio(const GreensTable& table, const Wavepacket& wp) {
  const double r = wp.dt / table.dt;
  const int q = static_cast<int>(std::llround(r));
  if (q >= 1 && std::abs(r - q) < 1e-9) return q;
  return 0;
}

}  // namespace

double convolve(const GreensTable& table, const Wavepacket& wp, double t, DiagonalWeight diag,
                const std::function<void(const std::string&)>& warn) {
  const int q = grid_ratio(table, wp);
  if (q == 0)
    throw std::invalid_argument(
        "convolve: wavepacket spacing must be an integer multiple of the table spacing");
  const double wdiag = (diag == DiagonalWeight::Half) ? 0.5 : 1.0;
  const double dtw = wp.dt;
  bool truncated = false;

  double acc = 0.0;
  for (int i = 0; i < wp.size(); ++i) {
    const double ti = wp.time_at(i);
    if (ti > t + 1e-9 * dtw) break;
    const double m_real = (t - ti) / table.dt;
    const long m_idx = std::llround(m_real);
    if (std::abs(m_real - m_idx) > 1e-6)
      throw std::invalid_argument("convolve: t is off the table grid relative to the wavepacket");
    if (m_idx >= table.rows()) {
      truncated = true;
      continue;
    }
    if (m_idx < 0) continue;
    double inner = 0.0;
    for (int j = 0; j <= i; ++j) {
      const long k_idx = static_cast<long>(i - j) * q;
      if (k_idx >= table.cols()) {
        truncated = true;
        continue;
      }
      const double w = (j == i) ? wdiag : 1.0;
      inner += w * wp.eps(j) * table.values(m_idx, k_idx);
    }
    acc += wp.eps(i) * inner;
  }
  if (truncated && warn)
    warn("convolve: wavepacket support extends beyond the table domain; tail truncated");
  return acc * dtw * dtw;
}

PopulationCurve convolve_curve(const GreensTable& table, const Wavepacket& wp,
                               const RealVector& times, DiagonalWeight diag,
                               const std::function<void(const std::string&)>& warn) {
  PopulationCurve curve;
  curve.times = times;
  curve.values.resize(times.size());
  curve.errors = RealVector::Zero(times.size());
  for (Eigen::Index n = 0; n < times.size(); ++n)
    curve.values(n) = convolve(table, wp, times(n), diag, warn);
  return curve;
}

}  // namespace qresp
