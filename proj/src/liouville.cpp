#include "qresp/liouville.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

namespace qresp::liouville {

VectorizedState vectorize(const DensityMatrix& rho) {
  if (rho.rows() != rho.cols()) throw std::invalid_argument("vectorize: rho must be square");
  const Eigen::Index d = rho.rows();
  VectorizedState v(d * d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) v(i * d + j) = rho(i, j);
  return v;
}

DensityMatrix devectorize(const VectorizedState& v) {
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (d * d != v.size()) throw std::invalid_argument("devectorize: size is not a perfect square");
  DensityMatrix rho(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) rho(i, j) = v(i * d + j);
  return rho;
}

Operator kron(const Operator& a, const Operator& b) {
  Operator out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

SuperOperator sandwich(const Operator& x, const Operator& y) {
  if (x.rows() != x.cols() || y.rows() != y.cols() || x.rows() != y.rows())
    throw std::invalid_argument("sandwich: operators must be square with equal dims");
  return kron(x, y.conjugate());
}

namespace {
Operator identity_like(const Operator& x) {
  return Operator::Identity(x.rows(), x.cols());
}
}  // namespace

SuperOperator commutator_super(const Operator& x) {
  const Operator id = identity_like(x);
  return sandwich(x, id) - sandwich(id, x.adjoint());
}

SuperOperator anticommutator_super(const Operator& x) {
  const Operator id = identity_like(x);
  return sandwich(x, id) + sandwich(id, x.adjoint());
}

SuperOperator dissipator_super(const Operator& x) {
  return sandwich(x, x) - 0.5 * anticommutator_super(x.adjoint() * x);
}

SuperOperator lindblad_generator(const Operator& h, const std::vector<Operator>& collapse) {
  SuperOperator g = Complex(0, -1) * commutator_super(h);
  for (const auto& c : collapse) g += dissipator_super(c);
  return g;
}

SuperOperator matrix_exponential(const SuperOperator& s, double t) {
  if (!s.allFinite() || !std::isfinite(t))
    throw std::invalid_argument("matrix_exponential: non-finite input");
  if (t == 0.0) return SuperOperator::Identity(s.rows(), s.cols());
  return (s * t).exp();
}

double hermiticity_defect(const Operator& a) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

bool is_hermitian(const Operator& a, double tol) {
  return a.rows() == a.cols() && hermiticity_defect(a) <= tol;
}

double spectral_norm(const Operator& a) {
  Eigen::SelfAdjointEigenSolver<Operator> es(a.adjoint() * a);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

Complex vec_trace(const VectorizedState& v) {
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  Complex tr = 0;
  for (Eigen::Index i = 0; i < d; ++i) tr += v(i * d + i);
  return tr;
}

std::vector<std::string> validate_density_matrix(const DensityMatrix& rho, double trace) {
  std::vector<std::string> out;
  if (rho.rows() != rho.cols()) {
    out.push_back("density matrix is not square");
    return out;
  }
  if (hermiticity_defect(rho) > 1e-10)
    out.push_back("not Hermitian within 1e-10 (defect " + std::to_string(hermiticity_defect(rho)) + ")");
  const double tr_err = std::abs(rho.trace() - Complex(trace, 0));
  if (tr_err > 1e-10)
    out.push_back("trace deviates from " + std::to_string(trace) + " by " + std::to_string(tr_err));
  Eigen::SelfAdjointEigenSolver<Operator> es(0.5 * (rho + rho.adjoint()));
  if (es.eigenvalues().minCoeff() < -1e-8)
    out.push_back("negative eigenvalue " + std::to_string(es.eigenvalues().minCoeff()));
  return out;
}

}  // namespace qresp::liouville
