#include <CLI11.hpp>

#include <iostream>

#include "rsicert/error.hpp"
#include "rsicert/pipeline.hpp"

namespace pl = rsicert::pipeline;

int main(int argc, char** argv) {
  CLI::App app{"rsi-certify: certify capability trajectories against singular growth"};
  app.require_subcommand(1);

  pl::RunOptions opts;
  std::string config, out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha, window;
  std::string format = "json";

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const pl::RunOptions&, std::ostream&);
  };
  const Command commands[] = {
      {"ingest", "validate and normalise raw series from a manifest", pl::cmd_ingest},
      {"envelope", "compute physical service envelopes", pl::cmd_envelope},
      {"estimate", "rolling elasticity estimates and breaks", pl::cmd_estimate},
      {"certify", "full pipeline, writes certificate.json and report.txt", pl::cmd_certify},
      {"simulate", "integrate a growth scenario", pl::cmd_simulate},
      {"control-sim", "closed-loop barrier supervision", pl::cmd_control_sim},
      {"report", "render an existing certificate (pass it as --config)", pl::cmd_report},
  };
  const Command* chosen = nullptr;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config, "input JSON (config, manifest, scenario or certificate)")->required();
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "RNG seed override");
    sub->add_option("--alpha", alpha, "significance level override");
    sub->add_option("--window", window, "estimation window override, s");
    sub->add_option("--format", format, "output format")->check(CLI::IsMember({"json", "csv"}));
    sub->callback([&chosen, &c] { chosen = &c; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pl::kExitError;
  }

  opts.config = config;
  opts.out = out;
  opts.seed = seed;
  opts.alpha = alpha;
  opts.window = window;
  opts.format = format;
  try {
    return chosen->run(opts, std::cerr);
  } catch (const rsicert::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return pl::kExitError;
}
