#include "qresp/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "qresp/liouville.hpp"

namespace qresp {

using liouville::kron;

namespace {

constexpr double kEntryTol = 1e-14;

Operator qubit_sigma_minus() {
  Operator s = Operator::Zero(2, 2);
  s(0, 1) = 1.0;
  return s;
}

Operator qubit_number() {
  Operator n = Operator::Zero(2, 2);
  n(1, 1) = 1.0;
  return n;
}

/// Operator acting as `op` on qubit `site` of an n-qubit register,
/// identity elsewhere. Site 0 is the most significant factor.
Operator on_site(const Operator& op, int site, int n_sites) {
  Operator out = Operator::Identity(1, 1);
  for (int s = 0; s < n_sites; ++s)
    out = kron(out, s == site ? op : Operator::Identity(2, 2));
  return out;
}

Operator mode_annihilator(int n_max) {
  Operator a = Operator::Zero(n_max + 1, n_max + 1);
  for (int n = 1; n <= n_max; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

}  // namespace

Operator MatterModel::excitation_number() const {
  Operator n = Operator::Zero(dim(), dim());
  for (int k = 0; k < dim(); ++k) n(k, k) = static_cast<double>(grade_of(k));
  return n;
}

AuxSpec aux_matched_to_L(const MatterModel& model, double chi) {
  AuxSpec aux;
  aux.chi = chi;
  aux.J = (chi / 2.0) * model.L;
  return aux;
}

std::vector<std::string> validate(const MatterModel& model) {
  std::vector<std::string> out;
  if (model.sys_dim < 2) out.push_back("sys_dim must be at least 2");
  if (model.noise_dim < 1) out.push_back("noise_dim must be at least 1");
  const int d = model.dim();
  if (model.H.rows() != d || model.H.cols() != d)
    out.push_back("H_M dimension does not match sys_dim*noise_dim");
  if (model.L.rows() != d || model.L.cols() != d)
    out.push_back("L dimension does not match sys_dim*noise_dim");
  if (static_cast<int>(model.sys_grading.size()) != model.sys_dim)
    out.push_back("sys_grading must assign an excitation count to every sys state");
  if (!out.empty()) return out;

  if (liouville::hermiticity_defect(model.H) > 1e-10)
    out.push_back("H_M is not Hermitian");
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (std::abs(model.L(i, j)) > kEntryTol && model.grade_of(i) != model.grade_of(j) - 1)
        out.push_back("L has an entry (" + std::to_string(i) + "," + std::to_string(j) +
                      ") that does not lower the excitation grading by one");
  for (size_t k = 0; k < model.dissipators.size(); ++k) {
    const auto& y = model.dissipators[k];
    if (y.rows() != d || y.cols() != d) {
      out.push_back("dissipator " + std::to_string(k) + " has wrong dimension");
      continue;
    }
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (std::abs(y(i, j)) > kEntryTol && model.grade_of(i) > model.grade_of(j))
          out.push_back("dissipator " + std::to_string(k) + " raises the excitation grading");
  }
  if (model.measured_state == model.ground_state)
    out.push_back("measured_state must differ from ground_state");
  if (model.measured_state < 0 || model.measured_state >= model.sys_dim)
    out.push_back("measured_state out of range");
  if (model.ground_state < 0 || model.ground_state >= model.sys_dim)
    out.push_back("ground_state out of range");
  else if (model.sys_grading[model.ground_state] != 0)
    out.push_back("ground_state must carry excitation 0");
  if (!std::isfinite(model.omega0)) out.push_back("omega0 must be finite");
  if (model.noise_initial.rows() != model.noise_dim || model.noise_initial.cols() != model.noise_dim)
    out.push_back("noise_initial dimension does not match noise_dim");

  // deduplicate repeated per-entry messages
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

MatterModel rotating_frame(const MatterModel& model) {
  if (static_cast<int>(model.sys_grading.size()) != model.sys_dim)
    throw std::invalid_argument("rotating_frame: model has no excitation grading");
  MatterModel out = model;
  out.H = model.H - model.omega0 * model.excitation_number();
  return out;
}

Manifold make_manifold(const std::vector<int>& grading, int cap) {
  Manifold m;
  m.full_dim = static_cast<int>(grading.size());
  for (int k = 0; k < m.full_dim; ++k)
    if (grading[k] <= cap) m.kept.push_back(k);
  return m;
}

Operator Manifold::restrict(const Operator& op) const {
  const int n = dim();
  Operator out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = op(kept[i], kept[j]);
  return out;
}

Operator Manifold::embed(const Operator& op) const {
  Operator out = Operator::Zero(full_dim, full_dim);
  const int n = dim();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(kept[i], kept[j]) = op(i, j);
  return out;
}

std::pair<Operator, std::vector<int>> restrict_manifold(
    const Operator& op, const std::vector<int>& grading, int cap) {
  if (op.rows() != static_cast<Eigen::Index>(grading.size()))
    throw std::invalid_argument("restrict_manifold: grading size does not match operator");
  Manifold m = make_manifold(grading, cap);
  if (m.kept.empty()) throw std::invalid_argument("restrict_manifold: empty retained basis");
  return {m.restrict(op), m.kept};
}

SuperOperator build_continuum_generator(const MatterModel& model) {
  auto violations = validate(model);
  if (!violations.empty())
    throw std::invalid_argument("build_continuum_generator: invalid model: " + violations.front());
  using namespace liouville;
  SuperOperator g = Complex(0, -1) * commutator_super(model.H) -
                    0.5 * anticommutator_super(model.L.adjoint() * model.L);
  for (const auto& y : model.dissipators) g += dissipator_super(y);
  return g;
}

MatterModel restrict_matter(const MatterModel& model, int cap) {
  Manifold sys = make_manifold(model.sys_grading, cap);
  if (sys.kept.empty()) throw std::invalid_argument("restrict_matter: empty retained basis");
  // Full-space manifold: sys restriction (x) identity on the noise factor.
  std::vector<int> grading(model.dim());
  for (int k = 0; k < model.dim(); ++k) grading[k] = model.grade_of(k);
  Manifold full = make_manifold(grading, cap);

  MatterModel out = model;
  out.sys_dim = sys.dim();
  out.H = full.restrict(model.H);
  out.L = full.restrict(model.L);
  for (auto& y : out.dissipators) y = full.restrict(y);
  out.sys_grading.clear();
  for (int s : sys.kept) out.sys_grading.push_back(model.sys_grading[s]);
  auto remap = [&](int s) {
    auto it = std::find(sys.kept.begin(), sys.kept.end(), s);
    if (it == sys.kept.end())
      throw std::invalid_argument("restrict_matter: distinguished state fell outside the manifold");
    return static_cast<int>(it - sys.kept.begin());
  };
  out.measured_state = remap(model.measured_state);
  out.ground_state = remap(model.ground_state);
  return out;
}

AssembledComposite assemble(const CompositeModel& composite) {
  const MatterModel& m = composite.matter;
  auto violations = validate(m);
  if (!violations.empty())
    throw std::invalid_argument("assemble: invalid matter model: " + violations.front());
  if (composite.mode.initial_fock > composite.mode.n_max)
    throw std::invalid_argument("assemble: initial_fock exceeds n_max");
  if (composite.manifold_cap < composite.mode.initial_fock)
    throw std::invalid_argument("assemble: manifold_cap below initial_fock");

  const int md = m.dim();
  const int fd = composite.mode.n_max + 1;
  const int ad = composite.aux ? 2 : 1;
  const Operator im = Operator::Identity(md, md);
  const Operator if_ = Operator::Identity(fd, fd);
  const Operator ia = Operator::Identity(ad, ad);
  const Operator a = mode_annihilator(composite.mode.n_max);

  AssembledComposite ac;
  ac.matter_dim = md;
  ac.mode_dim = fd;
  ac.aux_dim = ad;

  Operator h0 = kron(kron(m.H, if_), ia);
  // i (L a^dag - L^dag a); the generator adds gamma * this to H0.
  Operator coup = Complex(0, 1) * (kron(kron(m.L, a.adjoint()), ia) -
                                   kron(kron(m.L.adjoint(), a), ia));
  std::vector<Operator> collapse;
  if (composite.aux) {
    const auto& aux = *composite.aux;
    if (aux.chi <= 0) throw std::invalid_argument("assemble: aux chi must be positive");
    Operator sm = qubit_sigma_minus();
    // H_Mx = J sigma_x^+ + h.c.; the aux transition is resonant with the
    // carrier, so its frequency vanishes in the rotating frame.
    h0 += kron(kron(aux.J, if_), sm.adjoint()) + kron(kron(aux.J.adjoint(), if_), sm);
    collapse.push_back(aux.chi * kron(kron(im, if_), sm));
  }
  for (const auto& y : m.dissipators) collapse.push_back(kron(kron(y, if_), ia));

  std::vector<int> grading(md * fd * ad);
  for (int k = 0; k < md; ++k)
    for (int n = 0; n < fd; ++n)
      for (int x = 0; x < ad; ++x)
        grading[(k * fd + n) * ad + x] = m.grade_of(k) + n + x;

  ac.manifold = make_manifold(grading, composite.manifold_cap);
  if (ac.manifold.kept.empty()) throw std::invalid_argument("assemble: empty retained basis");
  ac.dim = ac.manifold.dim();
  ac.H0 = ac.manifold.restrict(h0);
  ac.coupling = ac.manifold.restrict(coup);
  for (auto& c : collapse) c = ac.manifold.restrict(c);
  ac.collapse = std::move(collapse);
  for (int k : ac.manifold.kept) ac.grading.push_back(grading[k]);

  // Initial state: sys ground (x) noise_initial (x) Fock(initial_fock) (x) aux ground.
  DensityMatrix rho_m = DensityMatrix::Zero(md, md);
  for (int na = 0; na < m.noise_dim; ++na)
    for (int nb = 0; nb < m.noise_dim; ++nb)
      rho_m(m.ground_state * m.noise_dim + na, m.ground_state * m.noise_dim + nb) =
          m.noise_initial(na, nb);
  DensityMatrix rho_f = DensityMatrix::Zero(fd, fd);
  rho_f(composite.mode.initial_fock, composite.mode.initial_fock) = 1.0;
  DensityMatrix rho_a = DensityMatrix::Zero(ad, ad);
  rho_a(0, 0) = 1.0;
  DensityMatrix rho0 = kron(kron(rho_m, rho_f), rho_a);
  ac.initial = liouville::vectorize(ac.manifold.restrict(rho0));

  // Readout: diagonal slots with sys index = measured_state, any noise,
  // mode, or aux configuration.
  for (int r = 0; r < ac.dim; ++r) {
    const int full_idx = ac.manifold.kept[r];
    const int matter_idx = full_idx / (fd * ad);
    if (matter_idx / m.noise_dim == m.measured_state)
      ac.measured_slots.push_back(r * ac.dim + r);
  }
  return ac;
}

SuperOperator build_single_mode_generator(const AssembledComposite& ac, double gamma) {
  if (!std::isfinite(gamma))
    throw std::invalid_argument("build_single_mode_generator: gamma must be finite");
  using namespace liouville;
  Operator h = ac.H0 + gamma * ac.coupling;
  return lindblad_generator(h, ac.collapse);
}

SuperOperator build_single_mode_generator(const CompositeModel& composite, double gamma) {
  return build_single_mode_generator(assemble(composite), gamma);
}

MatterModel preset_example1() {
  MatterModel m;
  m.sys_dim = 3;
  m.noise_dim = 1;
  m.H = Operator::Zero(3, 3);
  m.H(1, 1) = 1.0;
  m.H(2, 2) = 0.8;
  m.L = Operator::Zero(3, 3);
  m.L(0, 1) = std::sqrt(0.0036);
  m.L(0, 2) = std::sqrt(0.0064);
  m.sys_grading = {0, 1, 1};
  m.omega0 = 1.0;
  m.measured_state = 1;
  m.ground_state = 0;
  m.noise_initial = DensityMatrix::Identity(1, 1);
  return m;
}

MatterModel preset_example2() {
  // Chain sites 1,2,3,f as four qubits (site 1 most significant);
  // fluctuators alpha,beta form the ungraded noise factor.
  const int n_sys = 4, n_noise = 2;
  const double w1 = 1.0, w2 = 0.8, w3 = 0.9, wf = 0.5;
  const double wa = 0.1, wb = 0.1;
  const double j12 = 0.096, j23 = 0.1, j2a = 0.02, j2b = 0.02;
  const double l = 0.01;
  const double gf = std::sqrt(0.4), ga = std::sqrt(0.25), gb = std::sqrt(0.5);

  const int sd = 1 << n_sys, nd = 1 << n_noise;
  const Operator is = Operator::Identity(sd, sd);
  const Operator in_ = Operator::Identity(nd, nd);
  const Operator sm = qubit_sigma_minus();
  const Operator num = qubit_number();
  const Operator sx = sm + sm.adjoint();

  auto sys_op = [&](const Operator& op, int site) { return on_site(op, site, n_sys); };
  auto noise_op = [&](const Operator& op, int site) { return on_site(op, site, n_noise); };

  Operator h_sys = w1 * sys_op(num, 0) + w2 * sys_op(num, 1) + w3 * sys_op(num, 2) +
                   wf * sys_op(num, 3);
  Operator hop12 = j12 * sys_op(sm.adjoint(), 0) * sys_op(sm, 1);
  Operator hop23 = j23 * sys_op(sm.adjoint(), 1) * sys_op(sm, 2);
  h_sys += hop12 + hop12.adjoint() + hop23 + hop23.adjoint();

  Operator h_noise = wa * noise_op(num, 0) + wb * noise_op(num, 1);
  Operator h_cross = j2a * kron(sys_op(num, 1), noise_op(num, 0)) +
                     j2b * kron(sys_op(num, 1), noise_op(num, 1));

  MatterModel m;
  m.sys_dim = sd;
  m.noise_dim = nd;
  m.H = kron(h_sys, in_) + kron(is, h_noise) + h_cross;
  m.L = l * kron(sys_op(sm, 0), in_);
  m.dissipators = {
      gf * kron(sys_op(sm, 2) * sys_op(sm.adjoint(), 3), in_),
      ga * kron(is, noise_op(sx, 0)),
      gb * kron(is, noise_op(sx, 1)),
  };
  m.sys_grading.resize(sd);
  for (int k = 0; k < sd; ++k) m.sys_grading[k] = std::popcount(static_cast<unsigned>(k));
  m.omega0 = 1.0;
  m.measured_state = 1;  // only the f qubit (least significant) excited
  m.ground_state = 0;
  m.noise_initial = DensityMatrix::Zero(nd, nd);
  m.noise_initial(0, 0) = 1.0;  // fluctuators start in their ground state
  return m;
}

MatterModel preset_by_name(const std::string& name) {
  if (name == "example1") return preset_example1();
  if (name == "example2") return preset_example2();
  throw std::invalid_argument("unknown preset '" + name + "' (available: example1, example2)");
}

}  // namespace qresp
