#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

#include "rsicert/certify.hpp"
#include "rsicert/estimate.hpp"

namespace rsicert::pipeline {

/// Exit codes shared by the subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitSingular = 2;
inline constexpr int kExitInconclusive = 3;

struct RunOptions {
  std::filesystem::path config;
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<double> window;
  std::string format = "json";  ///< "json" or "csv"
};

/// Worker cap from RSI_CERTIFY_THREADS (default: hardware concurrency, at least 1).
unsigned thread_cap();

int verdict_exit_code(Verdict v);

/// Reads a JSON file, raising ConfigError with the path on failure.
nlohmann::json read_json(const std::filesystem::path& path);

int cmd_ingest(const RunOptions& opts, std::ostream& log);
int cmd_envelope(const RunOptions& opts, std::ostream& log);
int cmd_estimate(const RunOptions& opts, std::ostream& log);
int cmd_certify(const RunOptions& opts, std::ostream& log);
int cmd_simulate(const RunOptions& opts, std::ostream& log);
int cmd_control_sim(const RunOptions& opts, std::ostream& log);
/// Renders an existing certificate (opts.config) as text.
int cmd_report(const RunOptions& opts, std::ostream& log);

struct CertifyRun {
  Certificate certificate;
  std::vector<ElasticityEstimate> p_hat;
  std::optional<EnvelopeCheck> envelope;
  std::optional<TimeSeries> Idot;
};

/// Everything cmd_certify writes, computed without touching the output directory.
CertifyRun run_certify(const RunOptions& opts);

std::string render_report(const Certificate& cert);

}  // namespace rsicert::pipeline
