#include "qresp/protocol.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "qresp/liouville.hpp"

namespace qresp {

using namespace liouville;

namespace {

long long quantize(double x) { return std::llround(x * 1e9); }

struct Segment {
  double gamma;
  double duration;
};

std::vector<Segment> schedule_segments(const PulseSchedule& schedule) {
  std::vector<Segment> segs;
  double cursor = 0.0;
  if (!schedule.pulses.empty()) cursor = schedule.pulses.front().center - schedule.pulses.front().width / 2;
  for (const auto& p : schedule.pulses) {
    const double start = p.center - p.width / 2;
    if (start > cursor + 1e-12) segs.push_back({0.0, start - cursor});
    segs.push_back({p.area / p.width, p.width});
    cursor = p.center + p.width / 2;
  }
  if (!schedule.pulses.empty()) {
    // measure_at is referenced to the final pulse center, clamped to its end
    const double tail = std::max(0.0, schedule.measure_at - schedule.pulses.back().width / 2);
    if (tail > 0) segs.push_back({0.0, tail});
  } else if (schedule.measure_at > 0) {
    segs.push_back({0.0, schedule.measure_at});
  }
  return segs;
}

}  // namespace

std::vector<std::string> validate_schedule(const PulseSchedule& schedule) {
  std::vector<std::string> out;
  for (size_t i = 0; i < schedule.pulses.size(); ++i) {
    const auto& p = schedule.pulses[i];
    if (!(p.width > 0)) out.push_back("pulse " + std::to_string(i) + " has non-positive width");
    if (!std::isfinite(p.area) || !std::isfinite(p.center) || !std::isfinite(p.width))
      out.push_back("pulse " + std::to_string(i) + " has non-finite parameters");
  }
  for (size_t i = 0; i + 1 < schedule.pulses.size(); ++i) {
    const auto& a = schedule.pulses[i];
    const auto& b = schedule.pulses[i + 1];
    if (b.center - a.center < (a.width + b.width) / 2 - 1e-12)
      out.push_back("pulses " + std::to_string(i) + " and " + std::to_string(i + 1) +
                    " overlap or are out of order");
  }
  if (schedule.measure_at < 0) out.push_back("measure_at must be non-negative");
  return out;
}

const SuperOperator& ProtocolEngine::propagator(double gamma, double duration) {
  const auto key = std::make_pair(quantize(gamma), quantize(duration));
  auto it = propagators_.find(key);
  if (it != propagators_.end()) return it->second;
  auto git = generators_.find(key.first);
  if (git == generators_.end())
    git = generators_.emplace(key.first, build_single_mode_generator(ac_, gamma)).first;
  return propagators_.emplace(key, matrix_exponential(git->second, duration)).first->second;
}

VectorizedState ProtocolEngine::evolve(const PulseSchedule& schedule) {
  auto violations = validate_schedule(schedule);
  if (!violations.empty()) throw std::invalid_argument("evolve: " + violations.front());
  VectorizedState v = ac_.initial;
  for (const auto& seg : schedule_segments(schedule)) v = propagator(seg.gamma, seg.duration) * v;
  return v;
}

double ProtocolEngine::measure(const VectorizedState& v) const {
  double p = 0.0;
  for (int slot : ac_.measured_slots) p += v(slot).real();
  return p;
}

DensityMatrix evolve_schedule(const CompositeModel& composite, const PulseSchedule& schedule) {
  ProtocolEngine engine(assemble(composite));
  return devectorize(engine.evolve(schedule));
}

double measure_population(const DensityMatrix& rho, const AssembledComposite& ac) {
  if (rho.rows() != ac.dim)
    throw std::invalid_argument("measure_population: state does not live on the retained basis");
  if (ac.measured_slots.empty())
    throw std::invalid_argument("measure_population: measured state outside the retained basis");
  double p = 0.0;
  for (int slot : ac.measured_slots) p += rho(slot / ac.dim, slot % ac.dim).real();
  return p;
}

double run_single_pulse(ProtocolEngine& engine, double t_m, double t_gamma, double n_gamma) {
  PulseSchedule s;
  s.pulses.push_back({0.0, t_gamma, n_gamma});
  s.measure_at = t_m;
  return engine.measure(engine.evolve(s));
}

double run_two_pulse(ProtocolEngine& engine, double t_int, double t_m, double t_gamma,
                     double n_gamma) {
  if (t_int < t_gamma - 1e-12)
    throw std::invalid_argument("run_two_pulse: pulses overlap (t_int < t_gamma)");
  PulseSchedule s;
  s.pulses.push_back({-t_int, t_gamma, n_gamma});
  s.pulses.push_back({0.0, t_gamma, n_gamma});
  s.measure_at = t_m;
  return engine.measure(engine.evolve(s));
}

void parallel_for(int n, int workers, const std::function<void(int)>& body) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      try {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);  // drain remaining work
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

GreensTable reconstruct_greens(const RealMatrix& p_two, const RealVector& p_one, double n_gamma,
                               double dt, const RealMatrix& sigma_two, const RealVector& sigma_one,
                               std::int64_t trials) {
  if (n_gamma == 0) throw std::invalid_argument("reconstruct_greens: n_gamma must be non-zero");
  const int m_count = static_cast<int>(p_two.rows());
  const int k_count = static_cast<int>(p_two.cols());
  if (p_one.size() < m_count + k_count - 1)
    throw std::invalid_argument(
        "reconstruct_greens: single-pulse grid must extend to t_max_m + t_max_int");
  const bool noisy = sigma_two.size() > 0 && sigma_one.size() == p_one.size();
  const double n2 = n_gamma * n_gamma;

  GreensTable table;
  table.dt = dt;
  table.n_gamma = n_gamma;
  table.trials = trials;
  table.source = noisy ? "sampled" : "reconstructed";
  table.values.resize(m_count, k_count);
  table.errors = RealMatrix::Zero(m_count, k_count);
  for (int m = 0; m < m_count; ++m) {
    table.values(m, 0) = 2.0 * p_one(m) / n2;
    if (noisy) table.errors(m, 0) = 2.0 * sigma_one(m) / n2;
    for (int k = 1; k < k_count; ++k) {
      table.values(m, k) = (p_two(m, k) - p_one(m) - p_one(m + k)) / n2;
      if (noisy) {
        const double sg_a = 2.0 * sigma_one(m) / n2;
        const double sg_b = 2.0 * sigma_one(m + k) / n2;
        table.errors(m, k) = std::sqrt(sigma_two(m, k) * sigma_two(m, k) / (n2 * n2) +
                                       (sg_a * sg_a + sg_b * sg_b) / 4.0);
      }
    }
  }
  return table;
}

ProtocolResult protocol_run(const ProtocolRunSpec& spec) {
  if (spec.dt <= 0 || spec.t_gamma <= 0)
    throw std::invalid_argument("protocol_run: dt and t_gamma must be positive");
  if (spec.dt < spec.t_gamma - 1e-12)
    throw std::invalid_argument("protocol_run: dt must be >= t_gamma so every t_int is measurable");

  ProtocolEngine engine(assemble(spec.composite));
  const int m_count = static_cast<int>(std::floor(spec.t_max_m / spec.dt + 0.5)) + 1;
  const int k_count = static_cast<int>(std::floor(spec.t_max_int / spec.dt + 0.5)) + 1;
  const int ext = m_count + k_count - 1;
  const double gamma = spec.n_gamma / spec.t_gamma;

  // Warm the cache, then fill rows in parallel against read-only state.
  // Measurement times are center-referenced: t_m = 0 reads out at the pulse
  // edge, the step to t_m = dt covers dt - t_gamma/2, then whole dt steps.
  const SuperOperator& p_pulse = engine.propagator(gamma, spec.t_gamma);
  const SuperOperator& p_step = engine.propagator(0.0, spec.dt);
  const SuperOperator& p_gap1 = engine.propagator(0.0, spec.dt - spec.t_gamma);
  const SuperOperator& p_first = engine.propagator(0.0, spec.dt - spec.t_gamma / 2);

  ProtocolResult result;
  result.dt = spec.dt;
  result.m_count = m_count;
  result.k_count = k_count;
  result.p_one.resize(ext);
  result.sigma_one = RealVector::Zero(ext);
  result.p_two = RealMatrix::Zero(m_count, k_count);
  result.sigma_two = RealMatrix::Zero(m_count, k_count);
  result.small_parameter = std::pow(spectral_norm(spec.composite.matter.L) * spec.n_gamma, 2);

  const VectorizedState after_pulse = p_pulse * engine.composite().initial;

  {
    VectorizedState u = after_pulse;
    for (int j = 0; j < ext; ++j) {
      result.p_one(j) = engine.measure(u);
      if (j == 0)
        u = p_first * u;
      else if (j + 1 < ext)
        u = p_step * u;
    }
  }

  std::vector<VectorizedState> gap_states(k_count);
  if (k_count > 1) {
    gap_states[1] = p_gap1 * after_pulse;
    for (int k = 2; k < k_count; ++k) gap_states[k] = p_step * gap_states[k - 1];
  }
  parallel_for(k_count - 1, spec.workers, [&](int idx) {
    const int k = idx + 1;
    VectorizedState v = p_pulse * gap_states[k];
    for (int m = 0; m < m_count; ++m) {
      result.p_two(m, k) = engine.measure(v);
      if (m == 0)
        v = p_first * v;
      else if (m + 1 < m_count)
        v = p_step * v;
    }
  });

  result.reconstruction =
      reconstruct_greens(result.p_two, result.p_one, spec.n_gamma, spec.dt);
  result.reconstruction.t_gamma = spec.t_gamma;
  result.reconstruction.chi = spec.composite.aux ? spec.composite.aux->chi : 0.0;
  result.reconstruction.small_parameter = result.small_parameter;
  return result;
}

}  // namespace qresp
