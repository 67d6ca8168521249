#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "qresp/model.hpp"
#include "qresp/types.hpp"

namespace qresp {

/// Single-photon temporal amplitude profile on a uniform grid,
/// normalized so sum |eps|^2 dt = 1.
struct Wavepacket {
  double t_start = 0.0;
  double dt = 1.0;
  RealVector eps;

  double time_at(int i) const { return t_start + i * dt; }
  int size() const { return static_cast<int>(eps.size()); }
  double norm_defect() const;  // |sum eps^2 dt - 1|
};

/// eps(t) ~ exp(-(t-t0)^2 / (4 sigma_t^2)) normalized on the grid; the
/// intensity |eps|^2 then has standard deviation sigma_t. Warns through
/// `warn` when the grid is too coarse (sigma_t < 2 dt).
Wavepacket gaussian_wavepacket(double sigma_t, double t0, double t_start, double dt, int samples,
                               const std::function<void(const std::string&)>& warn = {});

/// Sampled two-time response on a rectangular grid. values(m,k) is
/// G(t_m = m dt, t_int = k dt); errors hold per-point standard errors
/// (zero for exact tables).
struct GreensTable {
  double dt = 0.0;
  RealMatrix values;  // M x K
  RealMatrix errors;  // M x K, >= 0
  // provenance
  std::string source;       // "exact" | "reconstructed" | "sampled"
  std::uint64_t model_hash = 0;
  double t_gamma = 0.0, n_gamma = 0.0, chi = 0.0;
  double small_parameter = 0.0;  // ||L||^2 n_gamma^2 for reconstructions
  std::int64_t trials = 0;       // 0 for exact
  std::uint64_t seed = 0;

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
};

struct PopulationCurve {
  RealVector times;
  RealVector values;
  RealVector errors;
};

/// Exact two-time response of the continuum dynamics,
///   G_i(t1,t2) = 2 Re <<i,i| P(t1) (L^dag rho) P(t2) (rho L) |0,0>>,
/// with P(t) generated by build_continuum_generator. Expects a validated
/// model in the rotating frame; the carrier phase is absorbed there.
/// The imaginary residue must stay below 1e-9 (checked).
double greens_exact(const MatterModel& model, double t1, double t2);

/// Grid evaluation through cached segment propagators: one matrix
/// exponential at dt, the rest by repeated multiplication.
/// max_bytes guards the value/error allocation (throws with the required
/// byte count when exceeded).
GreensTable greens_table_exact(const MatterModel& model, double dt, double t_max_m,
                               double t_max_int, std::size_t max_bytes = (1ull << 31));

enum class DiagonalWeight {
  Half,  // exact expansion of a discrete pulse train |sum dt eps f|^2
  Full,  // plain left-Riemann on the ordered double sum
};

/// Response population at time t:
///   P(t) = sum_i sum_{j<=i} w_ij dt^2 eps(t_i) eps(t_j) G(t-t_i, t_i-t_j)
/// with w_ij = 1 off the diagonal and the configured diagonal weight.
/// The wavepacket grid spacing must equal the table spacing or be an
/// integer multiple of it. Points outside the table domain raise a
/// truncation warning through `warn` and are dropped.
double convolve(const GreensTable& table, const Wavepacket& wp, double t,
                DiagonalWeight diag = DiagonalWeight::Half,
                const std::function<void(const std::string&)>& warn = {});

PopulationCurve convolve_curve(const GreensTable& table, const Wavepacket& wp,
                               const RealVector& times,
                               DiagonalWeight diag = DiagonalWeight::Half,
                               const std::function<void(const std::string&)>& warn = {});

}  // namespace qresp
