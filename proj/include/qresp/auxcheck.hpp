#pragma once

#include <vector>

#include "qresp/model.hpp"
#include "qresp/types.hpp"

namespace qresp {

/// Generator of the matter (x) auxiliary two-level system with the
/// coherent coupling J sigma_x^+ + h.c. and the fast local decay
/// D[chi sigma_x^-]. The aux transition is resonant with the carrier, so
/// its frequency vanishes in the rotating frame. Full Lindblad form,
/// exactly trace preserving.
SuperOperator build_coupled(const MatterModel& model, const Operator& j, double chi);

/// Effective matter-only generator after adiabatic elimination:
/// -i[H,.] + D[(2/chi) J].
SuperOperator effective_generator(const MatterModel& model, const Operator& j, double chi);

struct EliminationReport {
  std::vector<double> chis;
  std::vector<double> max_error;             // max trace distance over the time grid
  std::vector<std::vector<double>> curves;   // per chi, trace distance at each grid time
  RealVector times;
  double fitted_exponent = 0.0;  // slope of log max_error vs log chi
};

/// For each chi: evolve the coupled system (J = (chi/2) j_eff, so the
/// target dissipator D[j_eff] is the same across the sweep) from
/// matter_initial (x) aux ground, trace out the aux, and compare against
/// the effective dynamics by trace distance on the time grid. Fits the
/// decay of the maximum error as a power law in chi.
EliminationReport compare_elimination(const MatterModel& model, const Operator& j_eff,
                                      const std::vector<double>& chis, const RealVector& times,
                                      const DensityMatrix& matter_initial);

/// Same, with J = (chi/2) L so the engineered dissipator targets D[L].
EliminationReport compare_elimination_matched(const MatterModel& model,
                                              const std::vector<double>& chis,
                                              const RealVector& times,
                                              const DensityMatrix& matter_initial);

/// 0.5 * trace norm of (a - b).
double trace_distance(const DensityMatrix& a, const DensityMatrix& b);

/// Partial trace over the trailing factor of dimension sub_dim.
DensityMatrix partial_trace_last(const DensityMatrix& rho, int sub_dim);

}  // namespace qresp
