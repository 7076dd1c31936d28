// parahom: run homogenization experiments from a config file.
//
//   parahom <command> [--config PATH] [--out DIR] [--threads N] [--seed N]
//   parahom tensor --mode zero --config sep.cfg

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "parahom/commands.hpp"
#include "parahom/config.hpp"
#include "parahom/error.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw parahom::Error(parahom::ErrorCode::IoError, "cannot read config '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parabolic homogenization experiments"};
  app.set_version_flag("--version", std::string(parahom::version()));
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  std::string config_path;
  std::string out_dir;
  int threads = 0;
  std::uint64_t seed = 0;
  bool quiet = false;
  app.add_option("--config", config_path, "Experiment config (sectioned text or JSON)")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory (overrides output.directory)");
  app.add_option("--threads", threads, "Worker threads (overrides harness.threads)")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Probe seed (overrides harness.seed)");
  app.add_flag("-q,--quiet", quiet, "Print only the verdict line");

  std::string mode;
  for (const auto& name : parahom::command_names()) {
    auto* sub = app.add_subcommand(name);
    if (name == "tensor")
      sub->add_option("--mode", mode, "lambda, infinity or zero")->check(CLI::IsMember({"lambda", "infinity", "zero"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  parahom::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = parahom::parse_config(read_file(config_path));
    else cfg = parahom::parse_config("");
  } catch (const parahom::Error& e) {
    std::cerr << "parahom: " << e.what() << "\n";
    const std::string dir = out_dir.empty() ? cfg.output.directory : out_dir;
    try {
      parahom::write_failure_record(std::filesystem::path(dir) / command, command, 2,
                                    std::string(parahom::to_string(e.code())), e.what());
    } catch (const parahom::Error&) {
    }
    return 2;
  }
  if (!out_dir.empty()) cfg.output.directory = out_dir;
  if (threads > 0) cfg.harness.threads = threads;
  if (app.count("--seed")) cfg.harness.seed = seed;

  parahom::CommandOptions options;
  if (!mode.empty()) options.tensor_mode = mode;
  const auto outcome = parahom::run_command(command, cfg, options);

  if (!quiet)
    for (const auto& c : outcome.checks)
      std::printf("%s %s = %.6g (%s %.6g)\n", c.pass ? "ok  " : "FAIL", c.name.c_str(), c.value, c.relation.c_str(),
                  c.threshold);
  if (!outcome.error.empty()) std::cerr << "parahom: " << outcome.error << "\n";
  std::printf("%s: %s (exit %d)\n", command.c_str(), outcome.exit_code == 0 ? "pass" : "fail", outcome.exit_code);
  for (const auto& p : outcome.artifacts)
    if (!quiet) std::printf("  wrote %s\n", p.string().c_str());
  return outcome.exit_code;
}
