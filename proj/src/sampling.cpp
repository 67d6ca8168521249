#include "qresp/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace qresp {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t channel, std::uint64_t index) {
  return splitmix64(splitmix64(master ^ splitmix64(channel)) ^ index);
}

SampledEstimate sample_population(double p, std::int64_t n, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("sample_population: p must lie in [0,1]");
  if (n < 1) throw std::invalid_argument("sample_population: need at least one trial");
  std::mt19937_64 gen(seed);
  std::int64_t k = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double u = (gen() >> 11) * 0x1.0p-53;
    if (u < p) ++k;
  }
  SampledEstimate est;
  est.mean = static_cast<double>(k) / static_cast<double>(n);
  est.stderr_ = std::sqrt(est.mean * (1.0 - est.mean) / static_cast<double>(n));
  est.trials = n;
  est.seed = seed;
  return est;
}

double sigma_greens_single(double p_one, double n_gamma, std::int64_t n) {
  if (n_gamma == 0) throw std::invalid_argument("sigma_greens: n_gamma must be non-zero");
  if (n < 1) throw std::invalid_argument("sigma_greens: need at least one trial");
  const double n2 = n_gamma * n_gamma;
  return 2.0 / n2 * std::sqrt(p_one * (1.0 - p_one) / static_cast<double>(n));
}

double sigma_greens(double p_two, double p_one_a, double p_one_b, double n_gamma,
                    std::int64_t n) {
  if (n_gamma == 0) throw std::invalid_argument("sigma_greens: n_gamma must be non-zero");
  if (n < 1) throw std::invalid_argument("sigma_greens: need at least one trial");
  const double n4 = std::pow(n_gamma, 4);
  const double sa = sigma_greens_single(p_one_a, n_gamma, n);
  const double sb = sigma_greens_single(p_one_b, n_gamma, n);
  return std::sqrt(p_two * (1.0 - p_two) / (n4 * static_cast<double>(n)) +
                   (sa * sa + sb * sb) / 4.0);
}

double sigma_population_full(const Wavepacket& wp, const GreensTable& sigma_table, double t) {
  const double r = wp.dt / sigma_table.dt;
  const int q = static_cast<int>(std::llround(r));
  if (q < 1 || std::abs(r - q) > 1e-9)
    throw std::invalid_argument(
        "sigma_population: wavepacket spacing must be an integer multiple of the table spacing");
  double acc = 0.0;
  for (int i = 0; i < wp.size(); ++i) {
    const double ti = wp.time_at(i);
    if (ti > t + 1e-9 * wp.dt) break;
    const long m_idx = std::llround((t - ti) / sigma_table.dt);
    if (m_idx < 0 || m_idx >= sigma_table.rows()) continue;
    for (int j = 0; j < wp.size(); ++j) {
      if (wp.time_at(j) > t + 1e-9 * wp.dt) break;
      const long k_idx = std::labs(static_cast<long>(i - j)) * q;
      if (k_idx >= sigma_table.cols()) continue;
      const double s = sigma_table.errors(m_idx, k_idx);
      acc += wp.eps(i) * wp.eps(i) * wp.eps(j) * wp.eps(j) * s * s;
    }
  }
  return std::sqrt(acc) * wp.dt * wp.dt;
}

double sigma_population_approx(const GreensTable& sigma_table) {
  return sigma_table.dt * sigma_table.errors.mean();
}

Budget plan_budget(double target_sigma_p, double dt, double domain, double p_typical,
                   double n_gamma, std::int64_t n_cap) {
  if (target_sigma_p <= 0 || dt <= 0 || domain <= 0 || n_gamma == 0)
    throw std::invalid_argument("plan_budget: inputs must be positive");
  if (!(p_typical > 0 && p_typical < 1))
    throw std::invalid_argument("plan_budget: p_typical must lie in (0,1)");

  Budget b;
  b.target_sigma_p = target_sigma_p;
  b.dt = dt;
  b.domain = domain;
  b.target_sigma_g = target_sigma_p / dt;
  const double var = p_typical * (1.0 - p_typical);
  const double n4 = std::pow(n_gamma, 4);
  // Two-pulse channel: sigma_G ~ sqrt(P(1-P)/N)/n^2.
  const double n_two = var / (b.target_sigma_g * b.target_sigma_g * n4);
  // Single-pulse channel: sigma_G(t_m,0) = 2 sqrt(P(1-P)/N)/n^2.
  const double n_single = 4.0 * var / (b.target_sigma_g * b.target_sigma_g * n4);
  if (n_two > static_cast<double>(n_cap) || n_single > static_cast<double>(n_cap))
    throw std::runtime_error("plan_budget: target sigma_P unreachable within the trial cap");
  // tolerate float fuzz so analytic round numbers stay round
  b.n_per_point = std::max<std::int64_t>(1, std::llround(std::ceil(n_two - 1e-9)));
  b.n_single_per_point = std::max<std::int64_t>(1, std::llround(std::ceil(n_single - 1e-9)));
  const auto intervals = static_cast<std::int64_t>(std::floor(domain / dt + 0.5));
  b.grid_m = intervals + 1;
  b.grid_k = intervals + 1;
  b.total_per_interval = b.n_per_point * intervals;
  b.total_per_grid_point = b.n_per_point * b.grid_m * b.grid_k;
  return b;
}

ProtocolResult sampled_protocol_run(const ProtocolRunSpec& spec, std::int64_t n,
                                    std::uint64_t seed, bool exact_values) {
  ProtocolResult out = protocol_run(spec);
  if (n <= 0) return out;

  auto predicted = [&](double p) {
    return std::sqrt(std::clamp(p, 0.0, 1.0) * (1.0 - std::clamp(p, 0.0, 1.0)) /
                     static_cast<double>(n));
  };
  for (int j = 0; j < out.p_one.size(); ++j) {
    if (exact_values) {
      out.sigma_one(j) = predicted(out.p_one(j));
    } else {
      auto est = sample_population(std::clamp(out.p_one(j), 0.0, 1.0), n,
                                   derive_seed(seed, 1, static_cast<std::uint64_t>(j)));
      out.p_one(j) = est.mean;
      out.sigma_one(j) = est.stderr_;
    }
  }
  for (int m = 0; m < out.m_count; ++m)
    for (int k = 1; k < out.k_count; ++k) {
      if (exact_values) {
        out.sigma_two(m, k) = predicted(out.p_two(m, k));
        continue;
      }
      const auto idx = static_cast<std::uint64_t>(m) * out.k_count + k;
      auto est = sample_population(std::clamp(out.p_two(m, k), 0.0, 1.0), n,
                                   derive_seed(seed, 2, idx));
      out.p_two(m, k) = est.mean;
      out.sigma_two(m, k) = est.stderr_;
    }
  out.reconstruction =
      reconstruct_greens(out.p_two, out.p_one, spec.n_gamma, spec.dt, out.sigma_two,
                         out.sigma_one, n);
  out.reconstruction.t_gamma = spec.t_gamma;
  out.reconstruction.chi = spec.composite.aux ? spec.composite.aux->chi : 0.0;
  out.reconstruction.small_parameter = out.small_parameter;
  out.reconstruction.seed = seed;
  return out;
}

}  // namespace qresp
