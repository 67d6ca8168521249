#pragma once

#include <functional>
#include <map>
#include <vector>

#include "qresp/model.hpp"
#include "qresp/oracle.hpp"
#include "qresp/types.hpp"

namespace qresp {

/// Square coupling pulse: gamma = area/width while |t - center| < width/2.
struct Pulse {
  double center = 0.0;
  double width = 1.0;
  double area = 0.0;
};

/// Ordered pulse train plus a measurement time. The state is prepared at
/// the leading edge of the first pulse. measure_at counts from the CENTER
/// of the final pulse (the effective interaction time of a square pulse),
/// clamped so the measurement never happens before the pulse completes;
/// measure_at = 0 therefore reads out right at the final pulse edge.
struct PulseSchedule {
  std::vector<Pulse> pulses;
  double measure_at = 0.0;
};

std::vector<std::string> validate_schedule(const PulseSchedule& schedule);

/// Evolves the composite through a schedule; caches segment propagators
/// keyed by (gamma, duration) so sweeps sharing (t_gamma, n_gamma, dt)
/// reuse them. Thread-safe for concurrent reads once warmed; the table
/// fills below warm the cache up front and then parallelize over rows.
class ProtocolEngine {
 public:
  explicit ProtocolEngine(AssembledComposite ac) : ac_(std::move(ac)) {}

  const AssembledComposite& composite() const { return ac_; }
  const SuperOperator& propagator(double gamma, double duration);
  VectorizedState evolve(const PulseSchedule& schedule);
  double measure(const VectorizedState& v) const;

 private:
  AssembledComposite ac_;
  std::map<long long, SuperOperator> generators_;
  std::map<std::pair<long long, long long>, SuperOperator> propagators_;
};

/// Final density matrix (on the restricted composite space) after the
/// schedule.
DensityMatrix evolve_schedule(const CompositeModel& composite, const PulseSchedule& schedule);

/// Partial trace over mode, aux and noise factors, then the diagonal
/// element at the measured state.
double measure_population(const DensityMatrix& rho, const AssembledComposite& ac);

/// P^M after one pulse ending t_m before the measurement.
double run_single_pulse(ProtocolEngine& engine, double t_m, double t_gamma, double n_gamma);

/// P^M for pulses centered at -t_int and 0 (requires t_int >= t_gamma)
/// measured t_m after the second pulse ends.
double run_two_pulse(ProtocolEngine& engine, double t_int, double t_m, double t_gamma,
                     double n_gamma);

struct ProtocolRunSpec {
  CompositeModel composite;  // matter validated and in the rotating frame
  double dt = 10.0;
  double t_max_m = 1000.0;
  double t_max_int = 1000.0;
  double t_gamma = 1.0;
  double n_gamma = 0.25;
  int workers = 0;  // 0 = hardware concurrency
};

struct ProtocolResult {
  double dt = 0.0;
  int m_count = 0, k_count = 0;
  RealVector p_one;      // single-pulse channel on the extended grid (M+K-1)
  RealVector sigma_one;  // standard errors (zero when exact)
  RealMatrix p_two;      // M x K; column 0 is not measurable and stays 0
  RealMatrix sigma_two;
  GreensTable reconstruction;
  double small_parameter = 0.0;  // ||L||^2 n_gamma^2, must be << 1
};

/// Deterministic protocol emulation: single-pulse sweep, two-pulse sweep,
/// reconstruction. Populations are exact expectation values; shot noise
/// is layered on by the sampling module.
ProtocolResult protocol_run(const ProtocolRunSpec& spec);

/// Response kernel from measured populations:
///   G(t_m, 0)     = 2 P1(t_m) / n_gamma^2
///   G(t_m, t_int) = [P2(t_m,t_int) - P1(t_m) - P1(t_m+t_int)] / n_gamma^2
/// p_one must extend to t_max_m + t_max_int. sigma grids may be empty
/// (exact); otherwise errors propagate per the sampling module.
GreensTable reconstruct_greens(const RealMatrix& p_two, const RealVector& p_one, double n_gamma,
                               double dt, const RealMatrix& sigma_two = {},
                               const RealVector& sigma_one = {}, std::int64_t trials = 0);

/// Parallel-for helper shared by the table fills and the CLI sweeps.
void parallel_for(int n, int workers, const std::function<void(int)>& body);

}  // namespace qresp
