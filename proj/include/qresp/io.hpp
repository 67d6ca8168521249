#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qresp/auxcheck.hpp"
#include "qresp/model.hpp"
#include "qresp/oracle.hpp"
#include "qresp/protocol.hpp"
#include "qresp/sampling.hpp"

namespace qresp::io {

/// Everything a run needs, parsed from one JSON config. All quantities
/// are in "paper units": dimensionless rates and times, reciprocal pairs.
struct RunConfig {
  MatterModel model;           // as configured (lab frame)
  std::string model_name;      // preset name or "inline"
  double dt = 10.0;
  double t_max_m = 1000.0;
  double t_max_int = 1000.0;
  double t_gamma = 1.0;
  double n_gamma = 0.25;
  bool aux_enabled = true;
  double chi2 = 5.0;
  int manifold_cap = 1;
  // wavepacket
  std::string wp_shape = "gaussian";
  double wp_sigma_t = 100.0;
  double wp_t0 = 0.0;
  std::optional<double> wp_t_start;  // default t0 - 5 sigma, snapped to the grid
  std::optional<int> wp_samples;
  std::optional<double> wp_dt;       // default: grid dt
  DiagonalWeight diag_weight = DiagonalWeight::Half;
  // sampling
  bool sampling_enabled = false;
  std::int64_t trials = 10000;
  std::uint64_t seed = 1;
  // probes (sweep summaries, convolve default time)
  double probe_t_m = 50.0;
  double probe_t_int = 250.0;
  double probe_t = 200.0;
  // auxcheck
  std::vector<double> auxcheck_chi2 = {0.5, 5.0, 50.0};
  double auxcheck_t_max = 100.0;
  int auxcheck_steps = 51;
  // budget
  double budget_target_sigma_p = 0.01;
  double budget_p_typical = 0.01;
  // output
  std::string out_dir = "out";

  std::uint64_t config_hash = 0;  // FNV-1a over the canonical JSON
  std::string canonical;          // canonical (sorted-key) JSON text

  /// Validated rotating-frame matter model ready for the builders.
  MatterModel prepared_model() const;
  CompositeModel composite() const;
  ProtocolRunSpec protocol_spec(int workers = 0) const;
  Wavepacket wavepacket() const;
};

struct ConfigError {
  std::string message;
  int line = 0;  // 0 when not tied to a position
};

/// Parses and validates; on failure returns the itemized error list.
/// Unknown keys are rejected with a nearest-known-key suggestion.
std::variant<RunConfig, std::vector<ConfigError>> parse_config(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& path);
std::string config_errors_to_string(const std::vector<ConfigError>& errors);

std::uint64_t fnv1a64(std::string_view bytes);

/// CSV with header `t_m,t_int,G,sigma_G`, full decimal precision, plus a
/// JSON metadata sidecar at <path>.meta.json. read(write(x)) == x.
void write_table(const GreensTable& table, const std::filesystem::path& path,
                 std::uint64_t config_hash = 0);
GreensTable read_table(const std::filesystem::path& path);

void write_curve(const PopulationCurve& curve, const std::filesystem::path& path);
void write_budget(const Budget& budget, const std::filesystem::path& path);
void write_elimination_report(const EliminationReport& report,
                              const std::filesystem::path& path);

struct CommandOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int workers = 0;
  bool exact_sampling = false;
  std::optional<double> target_sigma;
  std::optional<std::string> table_path;  // convolve input
};

/// Subcommand drivers. Data goes to files under the output directory,
/// diagnostics to the error stream; they throw on failure.
void cmd_oracle(const RunConfig& cfg, const CommandOptions& opt);
void cmd_protocol(const RunConfig& cfg, const CommandOptions& opt);
void cmd_sample(const RunConfig& cfg, const CommandOptions& opt);
void cmd_convolve(const RunConfig& cfg, const CommandOptions& opt);
void cmd_auxcheck(const RunConfig& cfg, const CommandOptions& opt);
void cmd_budget(const RunConfig& cfg, const CommandOptions& opt);
void cmd_sweep(const RunConfig& cfg, const CommandOptions& opt, const std::string& axis,
               const std::vector<double>& values);

}  // namespace qresp::io
