#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mlafem/commands.hpp"

int main(int argc, char** argv) {
  using namespace mlafem;
  CLI::App app{"Multilevel adaptive finite elements on structured grids"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;

  auto add = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "run configuration (JSON)")->required();
    sub->add_option("--workers", workers, "worker threads (default: AFEM_WORKERS or 1)")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "override sampling.seed");
    sub->add_option("--out", out_dir, "override output.directory");
    return sub;
  };
  auto* run = add("run", "AFEM loop per sample: report CSV and snapshots");
  auto* study = add("convstudy", "adaptive against uniform refinement");
  auto* verify = add("verify", "convolutional realizations against the reference operators");
  auto* gen = add("gen-dataset", "export an MLFD dataset");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig config = load_config(config_path);
    if (seed) config.sampling.seed = *seed;
    if (out_dir) config.output_directory = *out_dir;
    const int w = workers ? *workers : default_workers();
    if (run->parsed()) return cmd_run(config, w, std::cout);
    if (study->parsed()) return cmd_convstudy(config, w, std::cout);
    if (verify->parsed()) return cmd_verify(config, std::cout);
    if (gen->parsed()) return cmd_gen_dataset(config, w, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "afem: configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "afem: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
