#include <doctest.h>

#include "oracles.hpp"
#include "qresp/liouville.hpp"
#include "qresp/model.hpp"
#include "qresp/oracle.hpp"
#include "qresp/protocol.hpp"

using namespace qresp;
using namespace qresp::liouville;

namespace {

MatterModel single_emitter(double l) {
  MatterModel m;
  m.sys_dim = 2;
  m.H = Operator::Zero(2, 2);
  m.L = Operator::Zero(2, 2);
  m.L(0, 1) = l;
  m.sys_grading = {0, 1};
  m.noise_initial = DensityMatrix::Identity(1, 1);
  return m;
}

CompositeModel example1_composite(double chi2) {
  CompositeModel c;
  c.matter = rotating_frame(preset_example1());
  c.mode = ModeSpec{1, 1};
  if (chi2 > 0) c.aux = aux_matched_to_L(c.matter, std::sqrt(chi2));
  c.manifold_cap = 1;
  return c;
}

}  // namespace

TEST_CASE("schedules without effective pulses leave the ground state alone") {
  CompositeModel c = example1_composite(5.0);
  ProtocolEngine engine(assemble(c));

  PulseSchedule empty;
  empty.measure_at = 40.0;
  const DensityMatrix rho = devectorize(engine.evolve(empty));
  // the photon stays put and the matter never leaves the ground state
  CHECK((rho - devectorize(engine.composite().initial)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(engine.measure(engine.evolve(empty)) == doctest::Approx(0.0));

  PulseSchedule zero;
  zero.pulses = {{-30.0, 1.0, 0.0}, {0.0, 1.0, 0.0}};
  zero.measure_at = 40.0;
  const DensityMatrix rho2 = devectorize(engine.evolve(zero));
  CHECK((rho2 - rho).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(engine.measure(engine.evolve(zero)) == doctest::Approx(0.0));
}

TEST_CASE("schedule validation") {
  PulseSchedule bad;
  bad.pulses = {{0.0, 1.0, 0.1}, {0.5, 1.0, 0.1}};  // overlapping
  CHECK(!validate_schedule(bad).empty());
  bad.pulses = {{0.0, -1.0, 0.1}};
  CHECK(!validate_schedule(bad).empty());
  bad.pulses = {{0.0, 1.0, 0.1}};
  bad.measure_at = -1.0;
  CHECK(!validate_schedule(bad).empty());

  CompositeModel c = example1_composite(5.0);
  ProtocolEngine engine(assemble(c));
  CHECK_THROWS(run_two_pulse(engine, 0.5, 10.0, 1.0, 0.1));  // t_int < t_gamma
}

TEST_CASE("single weak pulse matches second-order perturbation theory") {
  // resonant emitter: excited population is sin^2(n_gamma l) after the pulse,
  // independent of the pulse width
  const double l = 0.3;
  CompositeModel c;
  c.matter = single_emitter(l);
  c.mode = ModeSpec{1, 1};
  c.manifold_cap = 1;
  ProtocolEngine engine(assemble(c));
  for (double ng : {0.05, 0.1, 0.2}) {
    for (double tg : {0.5, 2.0}) {
      const double p = run_single_pulse(engine, 0.0, tg, ng);
      CHECK(p == doctest::Approx(std::sin(ng * l) * std::sin(ng * l)).epsilon(1e-9));
      CHECK(p == doctest::Approx(ng * ng * l * l).epsilon(2e-2 * ng * ng + 1e-3));
    }
  }
}

TEST_CASE("measure_population agrees with a direct partial trace") {
  CompositeModel c = example1_composite(5.0);
  const AssembledComposite ac = assemble(c);

  CHECK(measure_population(devectorize(ac.initial), ac) == doctest::Approx(0.0));

  auto gen = oracles::rng(41);
  const DensityMatrix rho = oracles::random_density(ac.dim, gen);
  // direct sum over retained states whose matter part is the measured one
  double direct = 0.0;
  for (int r = 0; r < ac.dim; ++r) {
    const int full = ac.manifold.kept[r];
    const int matter_idx = full / (ac.mode_dim * ac.aux_dim);
    if (matter_idx == c.matter.measured_state) direct += rho(r, r).real();
  }
  const double via = measure_population(rho, ac);
  CHECK(via == doctest::Approx(direct).epsilon(1e-12));
  CHECK(via >= 0.0);
  CHECK(via <= 1.0);

  // pure measured state reads 1
  DensityMatrix pure = DensityMatrix::Zero(ac.dim, ac.dim);
  for (int r = 0; r < ac.dim; ++r) {
    const int full = ac.manifold.kept[r];
    if (full / (ac.mode_dim * ac.aux_dim) == c.matter.measured_state) {
      pure(r, r) = 1.0;
      break;
    }
  }
  CHECK(measure_population(pure, ac) == doctest::Approx(1.0));
}

TEST_CASE("two-pulse run with a vanishing second pulse degenerates to one pulse") {
  CompositeModel c = example1_composite(5.0);
  ProtocolEngine engine(assemble(c));
  PulseSchedule degenerate;
  degenerate.pulses = {{-100.0, 1.0, 0.3}, {0.0, 1.0, 0.0}};
  degenerate.measure_at = 50.0;
  const double via_two = engine.measure(engine.evolve(degenerate));
  const double via_one = run_single_pulse(engine, 150.0, 1.0, 0.3);
  CHECK(via_two == doctest::Approx(via_one).epsilon(1e-12));
}

TEST_CASE("distant pulses respond additively") {
  CompositeModel c = example1_composite(5.0);
  ProtocolEngine engine(assemble(c));
  const double ng = 0.2, tg = 1.0, t_int = 4000.0, t_m = 30.0;
  const double p2 = run_two_pulse(engine, t_int, t_m, tg, ng);
  const double sum = run_single_pulse(engine, t_m, tg, ng) +
                     run_single_pulse(engine, t_m + t_int, tg, ng);
  CHECK(p2 == doctest::Approx(sum).epsilon(1e-6));
}

TEST_CASE("single-pulse channel calibrates to half the equal-time response") {
  // P1(t_m)/n^2 -> G(t_m, 0)/2 as n_gamma -> 0, error shrinking as n^2
  const MatterModel m = rotating_frame(preset_example1());
  CompositeModel c = example1_composite(25.0);
  ProtocolEngine engine(assemble(c));
  const double g_exact = greens_exact(m, 40.0, 0.0);
  std::vector<double> errs;
  // large areas keep the reabsorption error above the adiabatic-elimination
  // floor so the n^2 shrinkage is visible
  for (double ng : {0.8, 0.4, 0.2}) {
    const double chan = 2.0 * run_single_pulse(engine, 40.0, 1.0, ng) / (ng * ng);
    errs.push_back(std::abs(chan - g_exact) / g_exact);
  }
  CHECK(errs[0] < 0.05);
  CHECK(errs.back() < 3e-3);
  // each halving of n_gamma cuts the error roughly fourfold
  CHECK(errs[0] / errs[1] > 2.0);
  CHECK(errs[1] / errs[2] > 2.0);
}

TEST_CASE("reconstruction inverts manufactured populations exactly") {
  auto gen = oracles::rng(42);
  const int m_count = 7, k_count = 5;
  const double ng = 0.3, dt = 10.0;
  std::uniform_real_distribution<double> dist(0.0, 0.01);
  RealVector g0(m_count + k_count - 1);
  RealMatrix g(m_count, k_count);
  for (int j = 0; j < g0.size(); ++j) g0(j) = dist(gen);
  for (int i = 0; i < m_count; ++i)
    for (int k = 0; k < k_count; ++k) g(i, k) = dist(gen);

  RealVector p_one(m_count + k_count - 1);
  for (int j = 0; j < g0.size(); ++j) p_one(j) = 0.5 * ng * ng * g0(j);
  RealMatrix p_two = RealMatrix::Zero(m_count, k_count);
  for (int i = 0; i < m_count; ++i)
    for (int k = 1; k < k_count; ++k)
      p_two(i, k) = ng * ng * (g(i, k) + 0.5 * g0(i) + 0.5 * g0(i + k));

  const GreensTable rec = reconstruct_greens(p_two, p_one, ng, dt);
  for (int i = 0; i < m_count; ++i) {
    CHECK(rec.values(i, 0) == doctest::Approx(g0(i)).epsilon(1e-12));
    for (int k = 1; k < k_count; ++k)
      CHECK(rec.values(i, k) == doctest::Approx(g(i, k)).epsilon(1e-12));
  }

  CHECK_THROWS(reconstruct_greens(p_two, p_one.head(m_count), ng, dt));
  CHECK_THROWS(reconstruct_greens(p_two, p_one, 0.0, dt));
}

TEST_CASE("example 1 reconstruction matches the exact table within 2 percent") {
  const MatterModel m = rotating_frame(preset_example1());
  GreensTable exact = greens_table_exact(m, 10.0, 1000.0, 1000.0);

  ProtocolRunSpec spec;
  spec.composite = example1_composite(5.0);
  spec.dt = 10.0;
  spec.t_max_m = 1000.0;
  spec.t_max_int = 1000.0;
  spec.t_gamma = 1.0;
  spec.n_gamma = 0.25;
  const ProtocolResult r = protocol_run(spec);

  const double scale = exact.values.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (int i = 0; i < exact.rows(); ++i)
    for (int k = 0; k < exact.cols(); ++k)
      worst = std::max(worst, std::abs(r.reconstruction.values(i, k) - exact.values(i, k)));
  CHECK(worst / scale < 0.02);
  CHECK(r.small_parameter == doctest::Approx(0.01 * 0.0625).epsilon(1e-9));
  CHECK(r.reconstruction.source == "reconstructed");
}

TEST_CASE("reconstruction error shrinks as n_gamma squared") {
  const MatterModel m = rotating_frame(preset_example1());
  const double g_exact = greens_exact(m, 50.0, 250.0);
  CompositeModel c = example1_composite(5.0);
  ProtocolEngine engine(assemble(c));
  std::vector<double> errs;
  for (double ng : {0.5, 0.25, 0.125}) {
    const double p2 = run_two_pulse(engine, 250.0, 50.0, 1.0, ng);
    const double rec = (p2 - run_single_pulse(engine, 50.0, 1.0, ng) -
                        run_single_pulse(engine, 300.0, 1.0, ng)) /
                       (ng * ng);
    errs.push_back(std::abs(rec - g_exact));
  }
  CHECK(errs[0] > errs[1]);
  CHECK(errs[1] > errs[2]);
  // O(n^2) convergence: successive ratios near 4, within a factor of 2
  CHECK(errs[0] / errs[1] > 2.0);
  CHECK(errs[0] / errs[1] < 8.0);
  CHECK(errs[1] / errs[2] > 2.0);
  CHECK(errs[1] / errs[2] < 8.0);
}

TEST_CASE("wider pulses smooth the oscillations of the raw response rows") {
  // G_rec(200, t_int) on a fine t_int grid for t_gamma = 1 vs 30: averaging
  // over the wide pulse suppresses the splitting-frequency oscillation
  auto row_variance = [](double tg) {
    CompositeModel c = example1_composite(5.0);
    ProtocolEngine engine(assemble(c));
    const double ng = 0.25, t_m = 200.0;
    std::vector<double> vals;
    for (double t_int = 32.0; t_int <= 150.0; t_int += 2.0) {
      const double p2 = run_two_pulse(engine, t_int, t_m, tg, ng);
      const double rec = (p2 - run_single_pulse(engine, t_m, tg, ng) -
                          run_single_pulse(engine, t_m + t_int, tg, ng)) /
                         (ng * ng);
      vals.push_back(rec);
    }
    RealVector v = Eigen::Map<RealVector>(vals.data(), vals.size());
    const RealVector res = oracles::detrend(v, 2);
    return res.squaredNorm() / res.size();
  };
  const double narrow = row_variance(1.0);
  const double wide = row_variance(30.0);
  CHECK(wide < 0.25 * narrow);
}

TEST_CASE("responses are invariant under rigid time translation of the schedule") {
  CompositeModel c = example1_composite(5.0);
  ProtocolEngine engine(assemble(c));
  PulseSchedule a;
  a.pulses = {{-130.0, 1.0, 0.3}, {0.0, 1.0, 0.3}};
  a.measure_at = 77.0;
  PulseSchedule b = a;
  for (auto& p : b.pulses) p.center += 512.5;
  CHECK(engine.measure(engine.evolve(a)) ==
        doctest::Approx(engine.measure(engine.evolve(b))).epsilon(1e-13));
}

TEST_CASE("composite evolution preserves trace, Hermiticity and positivity") {
  CompositeModel c = example1_composite(5.0);
  ProtocolEngine engine(assemble(c));
  PulseSchedule s;
  s.pulses = {{-250.0, 1.0, 0.8}, {0.0, 1.0, 0.8}};
  s.measure_at = 100.0;
  const DensityMatrix rho = devectorize(engine.evolve(s));
  CHECK(std::abs(rho.trace() - Complex(1, 0)) < 1e-9);
  CHECK(hermiticity_defect(rho) < 1e-9);
  Eigen::SelfAdjointEigenSolver<Operator> es(0.5 * (rho + rho.adjoint()));
  CHECK(es.eigenvalues().minCoeff() > -1e-7);
}

TEST_CASE("without the engineered decay the exchange persists") {
  // matched aux: the single-pulse response decays with t_m; without aux and
  // dissipators the excitation has nowhere to go once the coupling is off
  CompositeModel with_aux = example1_composite(5.0);
  CompositeModel no_aux = example1_composite(0.0);
  ProtocolEngine ea(assemble(with_aux));
  ProtocolEngine en(assemble(no_aux));
  const double early_a = run_single_pulse(ea, 0.0, 1.0, 0.5);
  const double late_a = run_single_pulse(ea, 400.0, 1.0, 0.5);
  const double early_n = run_single_pulse(en, 0.0, 1.0, 0.5);
  const double late_n = run_single_pulse(en, 400.0, 1.0, 0.5);
  // matched aux: population decays like exp(-l1^2 t) ~ 0.24 over 400 units
  CHECK(late_a < 0.3 * early_a);
  CHECK(late_a == doctest::Approx(std::exp(-0.0036 * 400.0) * early_a).epsilon(0.1));
  // no decay channel: the excitation is stuck once the coupling is off
  CHECK(late_n == doctest::Approx(early_n).epsilon(1e-9));
  CHECK(early_n == doctest::Approx(early_a).epsilon(0.05));
}

TEST_CASE("protocol_run rejects unsound grids") {
  ProtocolRunSpec spec;
  spec.composite = example1_composite(5.0);
  spec.dt = 0.5;  // finer than the pulse width
  spec.t_gamma = 1.0;
  CHECK_THROWS(protocol_run(spec));
}
