#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "psvi/pipeline.hpp"

// Command-line front end: one subcommand per pipeline stage plus `all`.
// Flags override the corresponding config fields.
int main(int argc, char** argv) {
  CLI::App app{"County-level power system vulnerability index pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int threads = -1;
  std::int64_t seed = -1;

  for (const std::string& name : psvi::pipeline::kSubcommands) {
    CLI::App* sub = app.add_subcommand(name, name + " stage");
    sub->add_option("--config", config_path, "pipeline config JSON")->required();
    sub->add_option("--threads", threads, "worker thread count");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "override the output directory");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string subcommand = app.get_subcommands().front()->get_name();

  psvi::pipeline::Config config;
  try {
    config = psvi::pipeline::Config::load(config_path);
  } catch (const psvi::MissingInputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return psvi::pipeline::kExitMissingInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return psvi::pipeline::kExitSchema;
  }

  if (threads >= 0) config.threads = threads;
  if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
  if (!out_dir.empty()) config.out_dir = out_dir;

  return psvi::pipeline::run(subcommand, config, std::cerr);
}
