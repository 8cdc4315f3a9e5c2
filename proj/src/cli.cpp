#include "sfde_tem/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "sfde_tem/error.hpp"

namespace sfde::cli {

std::string_view to_string(Command c) {
  switch (c) {
    case Command::simulate: return "simulate";
    case Command::convergence: return "convergence";
    case Command::stability: return "stability";
    case Command::moments: return "moments";
    case Command::nu: return "nu";
  }
  return "?";
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "command", "model",    "a",         "b",        "x0",          "step_exponents",
      "ref_exponent", "horizon", "samples", "seed",   "p",           "output",
      "variant", "reference", "tail_fraction", "report_every", "replica", "b1",
      "b2",      "b3",       "b4"};
  return keys;
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError(key + ": expected " + expected + ", got '" + value + "'");
}

double as_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) bad_value(key, value, "a finite number");
  return out;
}

template <typename Int>
Int as_integer(const std::string& key, const std::string& value, const char* expected) {
  Int out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value, expected);
  return out;
}

std::vector<int> as_int_list(const std::string& key, const std::string& value) {
  std::string text = value;
  std::erase_if(text, [](char c) { return c == '[' || c == ']' || c == ' '; });
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) bad_value(key, value, "a comma-separated list of integers");
    out.push_back(as_integer<int>(key, item, "a comma-separated list of integers"));
  }
  if (out.empty()) bad_value(key, value, "a non-empty list of integers");
  return out;
}

Command as_command(const std::string& value) {
  for (auto c : {Command::simulate, Command::convergence, Command::stability, Command::moments, Command::nu}) {
    if (value == to_string(c)) return c;
  }
  bad_value("command", value, "one of simulate, convergence, stability, moments, nu");
}

void check(bool ok, const std::string& key, const std::string& message) {
  if (!ok) throw ConfigError(key + ": " + message);
}

std::vector<int> default_exponents(Command c) {
  if (c == Command::convergence) return {5, 6, 7, 8, 10};
  return {6};
}

double step_of(int exponent) { return std::ldexp(1.0, -exponent); }

void write_file(const std::string& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open '" + path + "' for writing");
  file << content;
  file.flush();
  if (!file) throw IoError("failed writing '" + path + "'");
}

std::string output_for(const RunConfig& config) {
  return config.output_path.empty() ? std::string(to_string(config.command)) + ".csv" : config.output_path;
}

}  // namespace

std::string format_number(double value) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", value);
  return std::string(buf, static_cast<std::size_t>(len));
}

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '" + content + "'");
    }
    std::string key = trim(std::string_view(content).substr(0, eq));
    std::string value = trim(std::string_view(content).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

RunConfig parse_config(const KeyValues& file, const KeyValues& flags) {
  const auto& known = config_keys();
  std::map<std::string, std::string> merged;
  for (const auto* source : {&file, &flags}) {
    for (const auto& [key, value] : *source) {
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        throw ConfigError(key + ": unknown configuration key");
      }
      merged[key] = value;
    }
  }

  RunConfig c;
  auto get = [&](const char* key) -> const std::string* {
    const auto it = merged.find(key);
    return it == merged.end() ? nullptr : &it->second;
  };

  const auto* command = get("command");
  check(command != nullptr, "command", "missing (simulate, convergence, stability, moments or nu)");
  c.command = as_command(*command);

  if (const auto* v = get("model")) c.model_name = *v;
  if (const auto* v = get("a")) c.model_params.a = as_double("a", *v);
  if (const auto* v = get("b")) c.model_params.b = as_double("b", *v);
  if (const auto* v = get("x0")) c.model_params.x0 = as_double("x0", *v);
  c.step_exponents = default_exponents(c.command);
  if (const auto* v = get("step_exponents")) c.step_exponents = as_int_list("step_exponents", *v);
  if (const auto* v = get("ref_exponent")) c.ref_exponent = as_integer<int>("ref_exponent", *v, "an integer");
  if (const auto* v = get("horizon")) c.horizon = as_double("horizon", *v);
  if (const auto* v = get("samples")) {
    c.samples = as_integer<std::size_t>("samples", *v, "a positive integer");
  }
  if (const auto* v = get("seed")) c.seed = as_integer<std::uint64_t>("seed", *v, "an unsigned 64-bit integer");
  if (const auto* v = get("p")) c.p_exponent = as_double("p", *v);
  if (const auto* v = get("output")) c.output_path = *v;
  if (const auto* v = get("variant")) {
    try {
      c.variant = parse_variant(*v);
    } catch (const ConfigError&) {
      bad_value("variant", *v, "truncated_em or classic_em");
    }
  }
  if (const auto* v = get("reference")) {
    if (*v == "fine_scheme") {
      c.reference = Reference::fine_scheme;
    } else if (*v == "closed_form") {
      c.reference = Reference::closed_form;
    } else {
      bad_value("reference", *v, "fine_scheme or closed_form");
    }
  }
  if (const auto* v = get("tail_fraction")) c.tail_fraction = as_double("tail_fraction", *v);
  if (const auto* v = get("report_every")) {
    c.report_every = as_integer<std::size_t>("report_every", *v, "a positive integer");
  }
  if (const auto* v = get("replica")) c.replica = as_integer<std::uint64_t>("replica", *v, "an unsigned integer");
  if (const auto* v = get("b1")) c.b1 = as_double("b1", *v);
  if (const auto* v = get("b2")) c.b2 = as_double("b2", *v);
  if (const auto* v = get("b3")) c.b3 = as_double("b3", *v);
  if (const auto* v = get("b4")) c.b4 = as_double("b4", *v);

  // Constraints.
  const auto names = builtin_names();
  check(std::find(names.begin(), names.end(), c.model_name) != names.end(), "model",
        "unknown model '" + c.model_name + "' (expected example1, example2 or gbm)");
  for (int j : c.step_exponents) check(j >= 0, "step_exponents", "exponents must be >= 0 (step <= 1)");
  check(c.horizon > 0.0, "horizon", "must be positive");
  check(c.p_exponent >= 2.0, "p", "must be >= 2");
  check(c.tail_fraction > 0.0 && c.tail_fraction <= 1.0, "tail_fraction", "must lie in (0, 1]");
  check(c.report_every >= 1, "report_every", "must be >= 1");
  switch (c.command) {
    case Command::convergence: {
      check(c.step_exponents.size() >= 2, "step_exponents", "convergence needs at least two step sizes");
      const int finest = *std::max_element(c.step_exponents.begin(), c.step_exponents.end());
      check(c.ref_exponent > finest, "ref_exponent",
            "must exceed the largest step exponent (" + std::to_string(finest) + ")");
      check(c.samples >= 100, "samples", "must be >= 100");
      break;
    }
    case Command::stability:
    case Command::moments:
      check(c.samples >= 100, "samples", "must be >= 100");
      [[fallthrough]];
    case Command::simulate:
      check(c.step_exponents.size() == 1, "step_exponents",
            std::string(to_string(c.command)) + " takes exactly one step exponent");
      break;
    case Command::nu:
      break;
  }
  return c;
}

RunConfig parse_config(std::string_view text, const KeyValues& flags) {
  return parse_config(parse_key_values(text), flags);
}

void write_convergence_csv(const ErrorTable& table, std::ostream& os) {
  os << "delta,rms_error,std_error\n";
  for (std::size_t i = 0; i < table.steps.size(); ++i) {
    os << format_number(table.steps[i]) << ',' << format_number(table.rms_errors[i]) << ','
       << format_number(table.std_errors[i]) << '\n';
  }
}

void write_stability_csv(const StabilityReport& report, std::ostream& os) {
  os << "t,log_moment";
  for (std::size_t i = 1; i <= report.dim; ++i) os << ",sample_mean_" << i;
  os << '\n';
  for (std::size_t k = 0; k < report.times.size(); ++k) {
    os << format_number(report.times[k]) << ',' << format_number(report.log_moment[k]);
    for (double m : report.mean_at(k)) os << ',' << format_number(m);
    os << '\n';
  }
}

void write_moments_csv(const MomentReport& report, std::ostream& os) {
  os << "t,moment_p,running_max\n";
  for (std::size_t k = 0; k < report.times.size(); ++k) {
    os << format_number(report.times[k]) << ',' << format_number(report.moments[k]) << ','
       << format_number(report.running_max[k]) << '\n';
  }
}

void write_trajectory_csv(const PathRecord& record, std::ostream& os) {
  os << 't';
  for (std::size_t i = 1; i <= record.dim; ++i) os << ",y_" << i;
  os << '\n';
  for (std::size_t k = 0; k < record.size(); ++k) {
    os << format_number(record.times[k]);
    for (double y : record.state(k)) os << ',' << format_number(y);
    os << '\n';
  }
}

namespace {

int dispatch(const RunConfig& c, std::ostream& out) {
  const SfdeModel model = make_builtin(c.model_name, c.model_params);
  std::ostringstream csv;
  const double step = step_of(c.step_exponents.front());

  switch (c.command) {
    case Command::simulate: {
      const SchemeConfig scheme{step, c.horizon, c.variant};
      const ResolvedGrid grid = resolve_grid(model, scheme);
      const auto noise = BrownianGrid::generate(c.seed, c.replica, model.dim_noise(), grid.step,
                                                static_cast<double>(grid.total_steps) * grid.step);
      const auto rec = simulate(model, scheme, noise.increments(), RecordOptions{.stride = c.report_every});
      write_trajectory_csv(rec, csv);
      write_file(output_for(c), csv.str());
      out << "final=";
      const auto y = rec.terminal();
      for (std::size_t i = 0; i < y.size(); ++i) out << (i ? "," : "") << format_number(y[i]);
      out << " truncation_hits=" << rec.truncation_hits << " diverged=" << (rec.diverged ? 1 : 0) << '\n';
      return kExitOk;
    }
    case Command::convergence: {
      StrongErrorOptions opts;
      for (int j : c.step_exponents) opts.steps.push_back(step_of(j));
      opts.step_ref = step_of(c.ref_exponent);
      opts.horizon = c.horizon;
      opts.samples = c.samples;
      opts.seed = c.seed;
      opts.reference = c.reference;
      opts.variant = c.variant;
      opts.threads = c.threads;
      const auto table = strong_error(model, opts);
      write_convergence_csv(table, csv);
      write_file(output_for(c), csv.str());
      out << "slope=" << (table.degenerate ? std::string("nan") : format_number(table.fitted_slope)) << '\n';
      return kExitOk;
    }
    case Command::stability: {
      StabilityOptions opts;
      opts.scheme = SchemeConfig{step, c.horizon, c.variant};
      opts.p = c.p_exponent;
      opts.samples = c.samples;
      opts.seed = c.seed;
      opts.tail_fraction = c.tail_fraction;
      opts.report_every = c.report_every;
      opts.threads = c.threads;
      const auto report = stability_decay(model, opts);
      write_stability_csv(report, csv);
      write_file(output_for(c), csv.str());
      out << "moment_rate=" << format_number(report.moment_rate)
          << " negative_pathwise_fraction=" << format_number(report.negative_rate_fraction());
      const auto mean = report.mean_at(report.times.size() - 1);
      out << " mean_T=";
      for (std::size_t i = 0; i < mean.size(); ++i) out << (i ? "," : "") << format_number(mean[i]);
      out << (report.clamped ? " clamped=1" : "") << '\n';
      return kExitOk;
    }
    case Command::moments: {
      MomentOptions opts;
      opts.scheme = SchemeConfig{step, c.horizon, c.variant};
      opts.p = c.p_exponent;
      opts.samples = c.samples;
      opts.seed = c.seed;
      opts.report_every = c.report_every;
      opts.threads = c.threads;
      const auto report = moment_estimate(model, opts);
      write_moments_csv(report, csv);
      write_file(output_for(c), csv.str());
      out << "max_moment=" << format_number(report.max_moment) << " diverged=" << report.diverged << '\n';
      return kExitOk;
    }
    case Command::nu: {
      const auto& k = model.constants();
      auto pick = [](const std::optional<double>& flag, const std::optional<double>& declared,
                     const char* key) {
        if (flag) return *flag;
        if (declared) return *declared;
        throw ConfigError(std::string(key) + ": not declared by the model; pass it explicitly");
      };
      const double b1 = pick(c.b1, k.b1, "b1");
      const double b2 = pick(c.b2, k.b2, "b2");
      const double b3 = pick(c.b3, k.b3, "b3");
      const double b4 = pick(c.b4, k.b4, "b4");
      const double nu = admissible_nu(b1, b2, b3, b4, c.p_exponent, model.tau());
      out << "nu=" << format_number(nu) << '\n';
      return kExitOk;
    }
  }
  return kExitConfig;
}

}  // namespace

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(config, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace sfde::cli
