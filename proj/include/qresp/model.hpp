#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qresp/types.hpp"

namespace qresp {

/// Matter subsystem: a graded ("optically active") factor of dimension
/// sys_dim carrying the excitation grading, optionally tensored with an
/// ungraded environment factor (e.g. fluctuator pairs) of dimension
/// noise_dim. All operators live on the full space sys (x) noise with
/// sys-major basis ordering: index = s * noise_dim + n.
///
/// Units: energies in rad/time, L and extra dissipators in time^{-1/2},
/// all dimensionless ("paper units").
struct MatterModel {
  int sys_dim = 0;
  int noise_dim = 1;
  Operator H;                         // matter Hamiltonian, Hermitian
  Operator L;                         // field coupling, strictly lowering
  std::vector<Operator> dissipators;  // extra Lindblad operators Y_k
  std::vector<int> sys_grading;       // excitation count per sys basis state
  double omega0 = 0.0;                // carrier frequency
  int measured_state = 1;             // sys basis index of the readout state
  int ground_state = 0;               // sys basis index, excitation 0
  DensityMatrix noise_initial;        // initial state of the noise factor

  int dim() const { return sys_dim * noise_dim; }
  /// Excitation count of full-space basis state k (noise contributes 0).
  int grade_of(int k) const { return sys_grading[k / noise_dim]; }
  /// Excitation-number operator on the full space.
  Operator excitation_number() const;
};

struct ModeSpec {
  int n_max = 1;        // Fock truncation (levels 0..n_max)
  int initial_fock = 1; // photon number at protocol start
};

struct AuxSpec {
  double chi = 0.0;  // decay amplitude of the auxiliary two-level system
  Operator J;        // coherent coupling amplitudes, lowering on the matter grading
};

/// Auxiliary coupling matched so the engineered dissipator equals D[L]:
/// J = (chi/2) L.
AuxSpec aux_matched_to_L(const MatterModel& model, double chi);

struct CompositeModel {
  MatterModel matter;
  ModeSpec mode;
  std::optional<AuxSpec> aux;
  int manifold_cap = 1;
};

/// Structural checks; returns human-readable violations (empty = valid).
std::vector<std::string> validate(const MatterModel& model);

/// Shift to the frame rotating at omega0: H -> H - omega0 * N_exc.
/// Within any constant-coupling segment the single-mode Liouvillian is
/// then time independent and the carrier phase bookkeeping is absorbed.
MatterModel rotating_frame(const MatterModel& model);

/// Projection onto total excitation <= cap.
struct Manifold {
  std::vector<int> kept;  // full-space indices retained, ascending
  int full_dim = 0;
  int dim() const { return static_cast<int>(kept.size()); }
  Operator restrict(const Operator& op) const;
  /// Embeds a restricted operator back into the full space (zero-padded).
  Operator embed(const Operator& op) const;
};

Manifold make_manifold(const std::vector<int>& grading, int cap);

/// Restricts op to states with grading <= cap; also returns the retained
/// basis map. Throws if nothing is retained.
std::pair<Operator, std::vector<int>> restrict_manifold(
    const Operator& op, const std::vector<int>& grading, int cap);

/// Damped generator of the continuum dynamics between field interactions:
/// -i[H,.] - {L^dag L,.}/2 + sum_k D[Y_k]. The L feed term is excluded,
/// so the map is trace non-increasing. Expects a validated model in the
/// rotating frame.
SuperOperator build_continuum_generator(const MatterModel& model);

/// Matter model with the sys factor restricted to the excitation manifold
/// (noise factor kept whole). measured/ground indices are remapped.
MatterModel restrict_matter(const MatterModel& model, int cap);

/// Composite matter (x) mode (x) aux system restricted to the excitation
/// manifold, with everything needed to evolve pulse schedules.
struct AssembledComposite {
  Manifold manifold;          // on matter (x) mode (x) aux
  int dim = 0;                // retained dimension
  Operator H0;                // coupling-free Hamiltonian (rotating frame)
  Operator coupling;          // i(L a^dag - L^dag a); H(gamma) = H0 + gamma*coupling
  std::vector<Operator> collapse;  // aux decay (if any) + extra dissipators
  VectorizedState initial;    // matter ground (x) noise_initial (x) Fock(n0) (x) aux ground
  std::vector<int> measured_slots;  // vec-diagonal slots summed by the readout
  std::vector<int> grading;   // grading of retained states
  int matter_dim = 0, mode_dim = 0, aux_dim = 1;
};

AssembledComposite assemble(const CompositeModel& composite);

/// Generator on the restricted composite space for a constant coupling.
SuperOperator build_single_mode_generator(const AssembledComposite& ac, double gamma);
SuperOperator build_single_mode_generator(const CompositeModel& composite, double gamma);

/// Two chromophores sharing a ground state; readout on state 1.
MatterModel preset_example1();

/// Four-site transport chain with an incoherent sink and a pair of
/// two-level fluctuators as a non-Markovian noise source; readout on the
/// sink site.
MatterModel preset_example2();

MatterModel preset_by_name(const std::string& name);

}  // namespace qresp
