#pragma once

#include <vector>

#include "qresp/types.hpp"

namespace qresp::liouville {

/// Row-major vectorization: vec(rho)(i*d+j) = rho(i,j).
VectorizedState vectorize(const DensityMatrix& rho);
DensityMatrix devectorize(const VectorizedState& v);

/// Kronecker product, dims multiply.
Operator kron(const Operator& a, const Operator& b);

/// Superoperator for rho -> X rho Y^dag. Throws on dimension mismatch.
SuperOperator sandwich(const Operator& x, const Operator& y);

/// rho -> X rho - rho X
SuperOperator commutator_super(const Operator& x);

/// rho -> X rho + rho X
SuperOperator anticommutator_super(const Operator& x);

/// Lindblad dissipator rho -> X rho X^dag - {X^dag X, rho}/2.
SuperOperator dissipator_super(const Operator& x);

/// Full Lindblad generator -i[H,.] + sum_k D[C_k].
SuperOperator lindblad_generator(const Operator& h,
                                 const std::vector<Operator>& collapse);

/// exp(S*t) by scaling-and-squaring with a Pade approximant.
/// Throws on non-finite entries.
SuperOperator matrix_exponential(const SuperOperator& s, double t);

/// max |A(i,j) - A^dag(i,j)|
double hermiticity_defect(const Operator& a);
bool is_hermitian(const Operator& a, double tol = 1e-12);

/// Largest singular value.
double spectral_norm(const Operator& a);

/// Trace of the devectorized state.
Complex vec_trace(const VectorizedState& v);

/// Checks for a physical state: Hermitian within 1e-10, trace within
/// 1e-10 of `trace`, eigenvalues >= -1e-8. Returns human-readable
/// violations, empty when the state is valid.
std::vector<std::string> validate_density_matrix(const DensityMatrix& rho,
                                                 double trace = 1.0);

}  // namespace qresp::liouville
