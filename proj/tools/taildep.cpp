#include <cstdint>
#include <string>

#include "CLI11.hpp"
#include "taildep/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"spatial tail dependence toolkit"};
  app.require_subcommand(1);

  taildep::CliOptions opt;
  const auto add_common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON config file");
    sub->add_option_function<std::uint64_t>(
        "--seed", [&opt](const std::uint64_t& v) {
          opt.seed = v;
          opt.has_seed = true;
        },
        "RNG seed (required for simulate and train)");
    sub->add_option_function<int>(
        "--threads", [&opt](const int& v) {
          opt.threads = v;
          opt.has_threads = true;
        },
        "worker threads");
    sub->add_option("--out", opt.out_dir, "output directory (default: run)");
    sub->add_flag("--verbose", opt.verbose, "extra progress output");
  };

  struct Entry {
    const char* name;
    const char* help;
  };
  static const Entry kCommands[] = {
      {"simulate", "generate a labeled corpus of dependence tensors"},
      {"featurize", "turn an observation CSV into a tensor and directional profile"},
      {"train", "fit the classifier on a corpus"},
      {"evaluate", "score a model across corpus splits and held-out probes"},
      {"predict", "classify an observation CSV across block sizes"},
  };
  for (const Entry& c : kCommands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    sub->callback([&opt, name = std::string(c.name)] { opt.command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  return taildep::run_command(opt);
}
