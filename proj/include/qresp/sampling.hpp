#pragma once

#include <cstdint>

#include "qresp/oracle.hpp"
#include "qresp/protocol.hpp"
#include "qresp/types.hpp"

namespace qresp {

/// RNG identifier recorded in output metadata. Seeds are derived with
/// splitmix64 over (master, channel, index); the bit stream is
/// std::mt19937_64 (standard-specified, reproducible across platforms);
/// binomial draws count Bernoulli successes, O(N) per point.
inline constexpr const char* kRngAlgorithm = "splitmix64/mt19937_64/bernoulli-count";

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t channel, std::uint64_t index);

struct SampledEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
};

/// k/N with k ~ Binomial(N, p) from the seeded generator;
/// stderr = sqrt(mean(1-mean)/N).
SampledEstimate sample_population(double p, std::int64_t n, std::uint64_t seed);

/// Shot-noise error of the single-pulse channel G(t_m, 0) = 2 P1 / n_gamma^2.
double sigma_greens_single(double p_one, double n_gamma, std::int64_t n);

/// Shot-noise error of the reconstructed G(t_m, t_int):
///   sigma^2 = P2(1-P2)/(N n^4) + [sigma_G(t_m,0)^2 + sigma_G(t_m+t_int,0)^2] / 4.
double sigma_greens(double p_two, double p_one_a, double p_one_b, double n_gamma, std::int64_t n);

/// Full covariance sum: sigma_P^2 = sum_ij dt^4 eps_i^2 eps_j^2
/// sigma_G^2(t - t_i, |t_i - t_j|), indices over the wavepacket support
/// before t.
double sigma_population_full(const Wavepacket& wp, const GreensTable& sigma_table, double t);

/// Constant-error reduction: sigma_P = dt * mean(sigma_G).
double sigma_population_approx(const GreensTable& sigma_table);

struct Budget {
  double target_sigma_p = 0.0;
  double target_sigma_g = 0.0;   // sigma_P / dt
  double dt = 0.0;
  double domain = 0.0;
  std::int64_t n_per_point = 0;         // two-pulse channel trials per grid point
  std::int64_t n_single_per_point = 0;  // single-pulse channel trials per point
  std::int64_t grid_m = 0, grid_k = 0;
  /// N_per_point x (T/dt): the per-interval accounting.
  std::int64_t total_per_interval = 0;
  /// N_per_point x (M*K): the per-grid-point accounting.
  std::int64_t total_per_grid_point = 0;
};

/// Inverts sigma_P = dt sigma_G, then the shot-noise formulas for N.
/// Throws when the target would need more than n_cap trials per point.
Budget plan_budget(double target_sigma_p, double dt, double domain, double p_typical,
                   double n_gamma, std::int64_t n_cap = 1'000'000'000'000LL);

/// protocol_run with every population replaced by a seeded binomial
/// estimate; per-point seeds derive from (seed, channel, grid index) so
/// partial re-runs reproduce. With exact_values the populations stay
/// exact and only the predicted errors for n trials are attached.
/// n <= 0 falls back to the plain exact run.
ProtocolResult sampled_protocol_run(const ProtocolRunSpec& spec, std::int64_t n,
                                    std::uint64_t seed, bool exact_values = false);

}  // namespace qresp
