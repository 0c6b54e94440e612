#pragma once

#include <cstdint>
#include <string>

namespace taildep {

struct CliOptions {
  std::string command;  // simulate | featurize | train | evaluate | predict
  std::string config_path;
  bool has_seed = false;
  std::uint64_t seed = 0;
  bool has_threads = false;
  int threads = 1;
  std::string out_dir;  // overrides the config's "out"
  bool verbose = false;
};

// Runs one subcommand and maps the error taxonomy onto exit codes:
// 0 success, 2 configuration/usage, 3 I/O, 4 numerical failure.
int run_command(const CliOptions& opt);

}  // namespace taildep
