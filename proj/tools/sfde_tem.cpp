// sfde_tem: run truncated Euler-Maruyama experiments and write CSV tables.
//
//   sfde_tem convergence --model example1 --step_exponents 5,6,7,8,10
//   sfde_tem stability --config run.cfg --samples 2000
//
// Every configuration key is also a --key flag; flags override the file.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "sfde_tem/cli.hpp"
#include "sfde_tem/error.hpp"

int main(int argc, char** argv) {
  namespace cli = sfde::cli;

  CLI::App app{"Truncated Euler-Maruyama experiments for stochastic functional differential equations"};
  std::string command;
  std::string config_path;
  app.add_option("command", command, "simulate | convergence | stability | moments | nu")
      ->check(CLI::IsMember({"simulate", "convergence", "stability", "moments", "nu"}));
  app.add_option("-c,--config", config_path, "flat key = value configuration file");

  std::map<std::string, std::string> flag_values;
  for (const auto& key : cli::config_keys()) {
    if (key == "command") continue;
    app.add_option("--" + key, flag_values[key]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitConfig;
  }

  cli::KeyValues flags;
  if (!command.empty()) flags.emplace_back("command", command);
  for (const auto& [key, value] : flag_values) {
    if (app.count("--" + key) > 0) flags.emplace_back(key, value);
  }

  std::string text;
  if (!config_path.empty()) {
    std::ifstream file(config_path, std::ios::binary);
    if (!file) {
      std::cerr << "i/o error: cannot read '" << config_path << "'\n";
      return cli::kExitIo;
    }
    std::ostringstream ss;
    ss << file.rdbuf();
    text = ss.str();
  }

  cli::RunConfig config;
  try {
    config = cli::parse_config(text, flags);
  } catch (const sfde::Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kExitConfig;
  }
  return cli::run(config, std::cout, std::cerr);
}
