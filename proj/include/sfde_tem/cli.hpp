#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sfde_tem/experiments.hpp"
#include "sfde_tem/model.hpp"
#include "sfde_tem/scheme.hpp"

namespace sfde::cli {

enum class Command { simulate, convergence, stability, moments, nu };

std::string_view to_string(Command c);

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;

struct RunConfig {
  Command command = Command::simulate;
  std::string model_name = "example1";
  BuiltinParams model_params;
  std::vector<int> step_exponents;  // step = 2^-j
  int ref_exponent = 14;
  double horizon = 10.0;
  std::size_t samples = 1000;
  std::uint64_t seed = 42;
  double p_exponent = 2.0;
  std::string output_path;
  Variant variant = Variant::truncated_em;
  Reference reference = Reference::fine_scheme;
  double tail_fraction = 0.6;
  std::size_t report_every = 1;
  std::uint64_t replica = 0;
  std::optional<double> b1, b2, b3, b4;
  std::size_t threads = 0;  // not a config key; SFDE_TEM_THREADS applies when 0
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Recognised configuration keys (also accepted as --key flags).
const std::vector<std::string>& config_keys();

/// Parses flat `key = value` lines; `#` starts a comment. Throws ConfigError
/// naming the line on malformed input.
KeyValues parse_key_values(std::string_view text);

/// Builds a validated RunConfig from file entries overridden by flag entries.
/// Throws ConfigError naming the offending key.
RunConfig parse_config(const KeyValues& file, const KeyValues& flags = {});
RunConfig parse_config(std::string_view text, const KeyValues& flags = {});

/// Executes the command, writes its CSV (if any) and prints summary lines to
/// `out`; diagnostics go to `err`. Returns one of the kExit* codes.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Round-trip text for a double: 17 significant digits.
std::string format_number(double value);

void write_convergence_csv(const ErrorTable& table, std::ostream& os);
void write_stability_csv(const StabilityReport& report, std::ostream& os);
void write_moments_csv(const MomentReport& report, std::ostream& os);
void write_trajectory_csv(const PathRecord& record, std::ostream& os);

}  // namespace sfde::cli
