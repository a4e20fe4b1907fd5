#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "vaislab/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Vaisman structure experiments: Bergman kernels, residual suites, deformations, embeddings, convergence"};
  std::string command;
  std::string config;
  std::string out;
  int jobs = 1;
  std::uint64_t seed = 0;
  app.add_option("command", command, "bergman | verify | deform | embed | converge | lee-approx")
      ->required()
      ->check(CLI::IsMember(vaislab::runner_commands()));
  app.add_option("--config", config, "experiment config (JSON)")->required();
  auto* out_opt = app.add_option("--out", out, "output directory (overrides output.dir)");
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::Range(1, 256));
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides seed)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : vaislab::kExitConfig;
  }

  vaislab::RunOptions options;
  options.jobs = jobs;
  if (*out_opt) options.out_dir = out;
  if (*seed_opt) options.seed = seed;
  const auto result = vaislab::run_command_file(command, config, options, std::cerr);
  for (const auto& a : result.artifacts) std::cout << a << "\n";
  std::cerr << command << ": " << result.message << "\n";
  return result.exit_code;
}
