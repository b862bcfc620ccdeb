#include "rsicert/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "rsicert/capability.hpp"
#include "rsicert/dynamics.hpp"
#include "rsicert/envelopes.hpp"
#include "rsicert/error.hpp"
#include "rsicert/safectl.hpp"
#include "rsicert/stats.hpp"

namespace rsicert::pipeline {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

/// Runs f and relabels module errors with the pipeline stage.
template <class F>
auto stage(const char* label, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), std::string(label) + ": " + e.detail());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string(label) + ": " + e.what());
  }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw Error(ErrorCode::ConfigError, "unknown " + where + " key '" + key + "'");
    }
  }
}

/// Inline object or a path (relative to the config) to a JSON file.
json inline_or_file(const json& j, const fs::path& base) {
  if (j.is_string()) return read_json(resolve(base, j.get<std::string>()));
  return j;
}

std::optional<TimeSeries> restrict(const TimeSeries& x, const std::optional<std::pair<double, double>>& window) {
  if (!window) return x;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x.times()[i] >= window->first && x.times()[i] <= window->second) keep.push_back(i);
  }
  if (keep.empty()) return std::nullopt;
  const auto n = static_cast<Eigen::Index>(keep.size());
  Eigen::VectorXd t(n), v(n), q(n);
  const Eigen::VectorXd w = x.weights();
  for (Eigen::Index k = 0; k < n; ++k) {
    t[k] = x.times()[keep[static_cast<std::size_t>(k)]];
    v[k] = x.values()[keep[static_cast<std::size_t>(k)]];
    q[k] = w[keep[static_cast<std::size_t>(k)]];
  }
  std::optional<Eigen::VectorXd> quality;
  if (x.has_quality()) quality = q;
  return TimeSeries(x.name(), x.unit(), std::move(t), std::move(v), std::move(quality), x.snapshot_version());
}

std::string short_hash(const std::string& version) {
  const auto colon = version.rfind(':');
  if (colon == std::string::npos) return version.substr(0, 12);
  return version.substr(0, colon + 1) + version.substr(colon + 1, 12);
}

struct Inputs {
  std::optional<TimeSeries> I;
  std::optional<TimeSeries> Idot;
  std::map<std::string, TimeSeries> envelope_series;
  json versions = json::object();
  std::vector<std::string> warnings;
};

json apply_overrides(json cfg, const RunOptions& opts) {
  json& est = cfg["estimation"];
  if (est.is_null()) est = json::object();
  if (opts.seed) est["seed"] = *opts.seed;
  if (opts.alpha) est["alpha"] = *opts.alpha;
  if (opts.window) est["window"] = *opts.window;
  return cfg;
}

Inputs load_inputs(const json& cfg, const fs::path& base) {
  Inputs in;
  std::optional<std::pair<double, double>> window;
  if (cfg.contains("window") && !cfg.at("window").is_null()) {
    window = std::make_pair(cfg.at("window").at(0).get<double>(), cfg.at("window").at(1).get<double>());
  }
  const json& cap = cfg.at("capability");
  check_keys(cap, {"I", "losses", "benchmark"}, "capability");
  std::optional<TimeSeries> I, Idot;
  if (cap.contains("I")) {
    I = stage("ingest", [&] { return series::ingest_csv(resolve(base, cap.at("I").get<std::string>()), "nat"); });
    in.versions["I"] = I->snapshot_version();
  } else {
    const auto spec = stage("capability", [&] {
      return capability::BenchmarkSpec::from_json(inline_or_file(cap.at("benchmark"), base));
    });
    std::map<std::string, TimeSeries> losses;
    for (const auto& [task, path] : cap.at("losses").items()) {
      losses.emplace(task, stage("ingest", [&] { return series::ingest_csv(resolve(base, path.get<std::string>()), ""); }));
      in.versions["loss:" + task] = losses.at(task).snapshot_version();
    }
    const auto li = stage("capability", [&] { return capability::loss_index(losses, spec); });
    for (const auto& w : li.warnings) in.warnings.push_back(w);
    const auto cs = stage("capability", [&] { return capability::canonicalize(li.itilde, spec); });
    I = cs.I;
    Idot = cs.Idot;
    in.versions["I"] = cs.I.snapshot_version();
  }
  if (cfg.contains("Idot")) {
    Idot = stage("ingest", [&] { return series::ingest_csv(resolve(base, cfg.at("Idot").get<std::string>()), "nat/s"); });
    in.versions["Idot"] = Idot->snapshot_version();
  } else if (!Idot) {
    Idot = stage("capability", [&] {
      return I->with_values(capability::finite_difference(I->times(), I->values()), "Idot", "nat/s");
    });
    in.versions["Idot"] = "finite-difference:" + I->snapshot_version();
  }
  if (!I->same_grid(*Idot)) throw Error(ErrorCode::GridMismatch, "ingest: I and Idot grids differ");

  if (cfg.contains("envelope") && cfg.at("envelope").value("enabled", true)) {
    const json& env = cfg.at("envelope");
    const std::pair<const char*, const char*> roles[] = {{"P_use", "W"}, {"T", "K"}, {"B_io", "bit/s"}, {"B_mem", "bit/s"}};
    for (const auto& [role, unit] : roles) {
      if (!env.contains(role)) continue;
      auto s = stage("ingest", [&] { return series::ingest_csv(resolve(base, env.at(role).get<std::string>()), unit); });
      in.versions[role] = s.snapshot_version();
      auto r = restrict(s, window);
      if (r) in.envelope_series.emplace(role, std::move(*r));
    }
  }
  in.I = restrict(*I, window);
  in.Idot = restrict(*Idot, window);
  return in;
}

dynamics::PhiSpec phi_from(const json& cfg) {
  if (!cfg.contains("phi")) throw Error(ErrorCode::ConfigError, "config: missing 'phi'");
  return stage("config", [&] { return dynamics::PhiSpec::from_json(cfg.at("phi")); });
}

/// Per-sample envelope test; nullopt when the envelope stage is disabled.
std::optional<EnvelopeCheck> envelope_stage(const json& cfg, const fs::path& base, const Inputs& in,
                                            const dynamics::PhiSpec& phi) {
  if (!cfg.contains("envelope") || !cfg.at("envelope").value("enabled", true)) return std::nullopt;
  const json& env = cfg.at("envelope");
  check_keys(env, {"enabled", "params", "P_use", "T", "B_io", "B_mem", "small_gain", "tol"}, "envelope");
  return stage("envelope", [&]() -> std::optional<EnvelopeCheck> {
    const auto params = envelopes::EnvelopeParams::from_json(inline_or_file(env.at("params"), base));
    if (!in.envelope_series.count("P_use") || !in.envelope_series.count("T")) {
      throw Error(ErrorCode::ConfigError, "envelope needs P_use and T series inside the analysis window");
    }
    const TimeSeries pt = envelopes::phi_pt(in.envelope_series.at("P_use"), in.envelope_series.at("T"), params.sigma_eff);
    auto get = [&](const char* role) -> std::optional<TimeSeries> {
      const auto it = in.envelope_series.find(role);
      return it == in.envelope_series.end() ? std::nullopt : std::optional<TimeSeries>(it->second);
    };
    const auto svc = envelopes::phi_svc(pt, get("B_io"), get("B_mem"), params.sigma_eff);
    Eigen::VectorXd phi_I(in.I->size());
    for (Eigen::Index i = 0; i < phi_I.size(); ++i) phi_I[i] = phi(in.I->values()[i]);
    const TimeSeries phi_series = in.I->with_values(std::move(phi_I), "Phi(I)", "1");
    return certify::envelope_check(*in.Idot, phi_series, svc.phi_svc, env.value("small_gain", 0.0),
                                   env.value("tol", 1e-9));
  });
}

Banded banded_from(const json& j, const char* key) {
  return j.contains(key) ? Banded::from_json(j.at(key)) : Banded{};
}

/// Representative p_tot band for one slope segment: the envelope of p_hat over it,
/// plus any configured resource contributions.
PtotEstimate segment_ptot(const std::vector<ElasticityEstimate>& est, std::size_t first, std::size_t last,
                          const json& cfg) {
  std::size_t lo = first, hi = first;
  for (std::size_t i = first; i < last; ++i) {
    if (est[i].value < est[lo].value) lo = i;
    if (est[i].value > est[hi].value) hi = i;
  }
  const Banded q{est[lo].value, est[hi].value, est[lo].se, est[hi].se};
  const json idx = cfg.value("indices", json::object());
  const auto effs = certify::effective_exponents(ExponentInputs::from_json(cfg.value("exponents", json::object())));
  const Upsilons ups{banded_from(idx, "upsilon_C"), banded_from(idx, "upsilon_D"), banded_from(idx, "upsilon_E")};
  return certify::ptot(q, banded_from(idx, "xi"), idx.value("gamma", 0.0), effs, ups);
}

json estimates_json(const std::vector<ElasticityEstimate>& est) {
  json a = json::array();
  for (const auto& e : est) a.push_back(e.to_json());
  return a;
}

std::string estimates_csv(const std::vector<ElasticityEstimate>& est) {
  std::string out = "t,p_hat,se,ci_lo,ci_hi,window,n_eff\n";
  for (const auto& e : est) {
    out += num(e.t) + "," + num(e.value) + "," + num(e.se) + "," + num(e.ci_lo) + "," + num(e.ci_hi) + "," +
           num(e.window) + "," + num(e.n_eff) + "\n";
  }
  return out;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

unsigned thread_cap() {
  unsigned cap = std::max(1U, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RSI_CERTIFY_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw Error(ErrorCode::ConfigError, "RSI_CERTIFY_THREADS must be a positive integer");
    }
    cap = static_cast<unsigned>(v);
  }
  return cap;
}

int verdict_exit_code(Verdict v) {
  switch (v) {
    case Verdict::NonsingularCertified: return kExitOk;
    case Verdict::SingularAdmissible: return kExitSingular;
    case Verdict::Inconclusive: return kExitInconclusive;
  }
  return kExitInconclusive;
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

// --- ingest ------------------------------------------------------------------------

int cmd_ingest(const RunOptions& opts, std::ostream& log) {
  const json manifest = read_json(opts.config);
  const fs::path base = opts.config.parent_path();
  if (!manifest.contains("series") || !manifest.at("series").is_array()) {
    throw Error(ErrorCode::ConfigError, "manifest needs a 'series' array");
  }
  struct Entry {
    fs::path path;
    std::string unit;
    std::string name;
  };
  std::vector<Entry> entries;
  for (const auto& s : manifest.at("series")) {
    check_keys(s, {"path", "unit", "name"}, "manifest series");
    Entry e{resolve(base, s.at("path").get<std::string>()), s.value("unit", ""), s.value("name", "")};
    if (e.name.empty()) e.name = e.path.stem().string();
    entries.push_back(std::move(e));
  }
  std::vector<std::optional<TimeSeries>> loaded(entries.size());
  std::vector<std::string> errors(entries.size());
  const unsigned workers = std::min<unsigned>(thread_cap(), static_cast<unsigned>(std::max<std::size_t>(1, entries.size())));
  {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < entries.size(); i += workers) {
          try {
            loaded[i] = series::ingest_csv(entries[i].path, entries[i].unit);
          } catch (const std::exception& e) {
            errors[i] = e.what();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  bool failed = false;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!errors[i].empty()) {
      log << "ingest: " << entries[i].path.string() << ": " << errors[i] << "\n";
      failed = true;
    }
  }
  if (failed) throw Error(ErrorCode::ParseError, "ingest aborted; see the per-file report above");

  json report = json::object();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const TimeSeries s = loaded[i]->with_values(loaded[i]->values(), entries[i].name, loaded[i]->unit());
    if (opts.format == "csv") {
      write_text(opts.out / (entries[i].name + ".csv"), series::to_csv(s));
    } else {
      write_text(opts.out / (entries[i].name + ".json"), dump(series::to_json(s)));
    }
    report[entries[i].name] = {{"unit", s.unit()}, {"samples", s.size()}, {"snapshot_version", s.snapshot_version()}};
  }
  write_text(opts.out / "ingest_report.json", dump(report));
  log << "ingested " << entries.size() << " series into " << opts.out.string() << "\n";
  return kExitOk;
}

// --- envelope ------------------------------------------------------------------------

int cmd_envelope(const RunOptions& opts, std::ostream& log) {
  const json cfg = read_json(opts.config);
  const fs::path base = opts.config.parent_path();
  if (!cfg.contains("envelope")) throw Error(ErrorCode::ConfigError, "config: missing 'envelope'");
  const json& env = cfg.at("envelope");
  const auto params = stage("envelope", [&] { return envelopes::EnvelopeParams::from_json(inline_or_file(env.at("params"), base)); });
  auto load = [&](const char* role, const char* unit) -> std::optional<TimeSeries> {
    if (!env.contains(role)) return std::nullopt;
    return stage("ingest", [&] { return series::ingest_csv(resolve(base, env.at(role).get<std::string>()), unit); });
  };
  const auto p_use = load("P_use", "W");
  const auto T = load("T", "K");
  if (!p_use || !T) throw Error(ErrorCode::ConfigError, "envelope: P_use and T series are required");
  const auto result = stage("envelope", [&] {
    return envelopes::phi_svc(envelopes::phi_pt(*p_use, *T, params.sigma_eff), load("B_io", "bit/s"),
                              load("B_mem", "bit/s"), params.sigma_eff);
  });
  json out = result.to_json();
  out["params"] = params.to_json();
  out["snapshot_versions"] = {{"P_use", p_use->snapshot_version()}, {"T", T->snapshot_version()}};
  if (params.p_max > 0.0) {
    const auto cap = stage("envelope", [&] { return envelopes::static_cap(params); });
    out["static_cap"] = {{"value", cap.value}, {"unit", "nat/s"}};
    if (cap.band) {
      out["static_cap"]["band"] = {{"first_order", cap.band->first_order},
                                   {"log_sd", cap.band->log_sd},
                                   {"lower_factor", cap.band->lower_factor},
                                   {"upper_factor", cap.band->upper_factor}};
    }
  }
  if (opts.format == "csv") {
    std::string csv = "t,phi_pt,phi_io,phi_mem,phi_svc,binding\n";
    for (Eigen::Index i = 0; i < result.phi_svc.size(); ++i) {
      csv += num(result.phi_svc.times()[i]) + "," + num(result.phi_pt.values()[i]) + "," +
             (result.phi_io ? num(result.phi_io->values()[i]) : "") + "," +
             (result.phi_mem ? num(result.phi_mem->values()[i]) : "") + "," + num(result.phi_svc.values()[i]) + "," +
             envelopes::to_string(result.binding[static_cast<std::size_t>(i)]) + "\n";
    }
    write_text(opts.out / "envelope.csv", csv);
  } else {
    write_text(opts.out / "envelope.json", dump(out));
  }
  for (const auto& w : result.warnings) log << "warning: " << w << "\n";
  if (const auto flag = result.dominant_flag()) log << "envelope: " << *flag << "\n";
  return kExitOk;
}

// --- estimate ------------------------------------------------------------------------

int cmd_estimate(const RunOptions& opts, std::ostream& log) {
  const json cfg = apply_overrides(read_json(opts.config), opts);
  const fs::path base = opts.config.parent_path();
  const Inputs in = load_inputs(cfg, base);
  if (!in.I) throw Error(ErrorCode::InsufficientWindow, "estimate: analysis window holds no samples");
  const auto est_cfg = stage("config", [&] { return EstimationConfig::from_json(cfg.at("estimation")); });
  const double window =
      est_cfg.window > 0.0 ? est_cfg.window : stage("estimate", [&] { return estimate::gcv_window(*in.I, *in.Idot); });
  const auto rolling = stage("estimate", [&] {
    return estimate::rolling_elasticity(*in.I, *in.Idot, window, est_cfg.lag, est_cfg.alpha, est_cfg.prewhiten);
  });
  json out{{"window", window}, {"estimates", estimates_json(rolling.estimates)}, {"gaps", rolling.gaps},
           {"snapshot_versions", in.versions}, {"unit", "1"}};
  if (rolling.estimates.size() >= 30) {
    SlopeSeries slopes;
    for (const auto& e : rolling.estimates) slopes.push_back({e.t, e.value, e.se, 0.5 * e.window});
    out["breaks"] = stage("estimate", [&] { return estimate::sup_wald_breaks(slopes, est_cfg.trim, est_cfg.alpha); }).to_json();
  }
  if (opts.format == "csv") {
    write_text(opts.out / "p_hat.csv", estimates_csv(rolling.estimates));
  } else {
    write_text(opts.out / "p_hat.json", dump(out));
  }
  log << "estimated " << rolling.estimates.size() << " windows (" << rolling.gaps.size() << " gaps), window "
      << short_num(window) << " s\n";
  return kExitOk;
}

// --- certify -------------------------------------------------------------------------

CertifyRun run_certify(const RunOptions& opts) {
  const json cfg = apply_overrides(read_json(opts.config), opts);
  const fs::path base = opts.config.parent_path();
  check_keys(cfg, {"capability", "Idot", "window", "phi", "envelope", "estimation", "exponents", "indices", "capital",
                   "region", "certify", "ceiling"},
             "certify config");
  const Inputs in = load_inputs(cfg, base);
  const auto est_cfg = stage("config", [&] { return EstimationConfig::from_json(cfg.at("estimation")); });
  const json ccfg = cfg.value("certify", json::object());
  check_keys(ccfg, {"nonbinding_slack", "nonbinding_coverage", "governance_delta", "grad_norm", "distribution"}, "certify");
  const dynamics::PhiSpec phi = phi_from(cfg);

  CertifyRun run;
  std::vector<std::string> notes = in.warnings;
  std::vector<SegmentEvidence> segments;
  json extras = json::object();
  std::optional<estimate::RollingElasticity> rolling;
  std::optional<EnvelopeCheck> envelope;
  dynamics::OsgoodResult osgood;

  if (!in.I || in.I->size() < 5) {
    notes.push_back("empty data window: " + std::to_string(in.I ? in.I->size() : 0) +
                    " capability samples inside the analysis window");
  } else {
    const double I_start = std::max(phi.domain_floor(), in.I->values().maxCoeff() > 0.0 ? in.I->values()[0] : 0.0);
    osgood = stage("dynamics", [&] { return dynamics::osgood_classify(phi, I_start); });
    envelope = envelope_stage(cfg, base, in, phi);
    double window = est_cfg.window;
    if (!(window > 0.0)) window = stage("estimate", [&] { return estimate::gcv_window(*in.I, *in.Idot); });
    extras["window"] = {{"value", window}, {"unit", "s"}};
    try {
      rolling = estimate::rolling_elasticity(*in.I, *in.Idot, window, est_cfg.lag, est_cfg.alpha, est_cfg.prewhiten);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AllWindowsDegenerate) throw Error(e.code(), std::string("estimate: ") + e.detail());
      notes.push_back(std::string("estimate: ") + e.detail());
    }
  }

  if (rolling) {
    const auto& est = rolling->estimates;
    extras["gaps"] = rolling->gaps.size();
    std::vector<std::pair<std::size_t, std::size_t>> ranges{{0, est.size()}};
    if (est.size() >= 30) {
      SlopeSeries slopes;
      for (const auto& e : est) slopes.push_back({e.t, e.value, e.se, 0.5 * e.window});
      const auto breaks = stage("estimate", [&] { return estimate::sup_wald_breaks(slopes, est_cfg.trim, est_cfg.alpha); });
      ranges = breaks.index_ranges;
      extras["breaks"] = breaks.to_json();
    } else {
      extras["breaks"] = "skipped: fewer than 30 slope points";
    }
    for (std::size_t s = 0; s < ranges.size(); ++s) {
      const auto [first, last] = ranges[s];
      const double t_end = s + 1 < ranges.size() ? est[ranges[s + 1].first].t : est.back().t;
      segments.push_back({est[first].t, t_end, stage("certify", [&] { return segment_ptot(est, first, last, cfg); })});
    }
  }

  DecideOptions dopt;
  dopt.alpha = est_cfg.alpha;
  dopt.nonbinding_slack = ccfg.value("nonbinding_slack", dopt.nonbinding_slack);
  dopt.nonbinding_coverage = ccfg.value("nonbinding_coverage", dopt.nonbinding_coverage);
  Certificate cert = stage("certify", [&] { return certify::decide(segments, envelope, osgood, dopt); });
  for (const auto& n : notes) cert.reasons.push_back(n);

  // Margins and optional audits.
  if (!segments.empty()) {
    double worst_plus = -std::numeric_limits<double>::infinity();
    double ptot_ref = 0.0;
    for (const auto& s : segments) {
      if (s.ptot.plus > worst_plus) {
        worst_plus = s.ptot.plus;
        ptot_ref = s.ptot.plus;
      }
    }
    if (ccfg.contains("grad_norm")) {
      cert.margins.manifold_distance =
          stage("certify", [&] { return certify::manifold_distance(ptot_ref, ccfg.at("grad_norm").get<double>()); });
    }
    if (ccfg.contains("distribution")) {
      const json& d = ccfg.at("distribution");
      const auto dm = stage("certify", [&] {
        return certify::distribution_margin(ptot_ref, d.value("gamma", 0.0), d.value("L_xi", 0.0), d.value("L_rho", 0.0),
                                            d.value("delta_W", 0.0), d.value("safety_delta", 0.1));
      });
      cert.margins.wasserstein_margin = dm.threshold - dm.worst_case_ptot;
      extras["distribution"] = {{"worst_case_ptot", dm.worst_case_ptot}, {"certified", dm.certified}};
    }
    const auto gov = certify::governance(worst_plus, ccfg.value("governance_delta", 0.1));
    extras["governance"] = {{"throttle", gov.throttle}, {"margin", gov.margin}};
  }

  if (cfg.contains("ceiling")) {
    const json& c = cfg.at("ceiling");
    auto ch = [&](const char* k) { return ChannelCeiling{c.at(k).at("value").get<double>(), c.at(k).value("se", 0.0)}; };
    const auto t = stage("certify", [&] {
      return certify::test_ceiling(c.at("upsilon_C").at("value").get<double>(), c.at("upsilon_C").value("se", 0.0), ch("io"),
                                   ch("mem"), ch("pow"), est_cfg.alpha);
    });
    extras["ceiling_test"] = t.to_json();
  }

  // Event-level bound from the most recent segment that supports the singular regime.
  if (cert.verdict == Verdict::SingularAdmissible && rolling) {
    for (auto it = cert.segments.rbegin(); it != cert.segments.rend(); ++it) {
      if (!(it->superlinearity.reject && it->envelope_nonbinding)) continue;
      const double delta = it->superlinearity.margin;
      double a0 = std::numeric_limits<double>::infinity();
      double I_t = 0.0, t_at = 0.0;
      for (Eigen::Index k = 0; k < in.I->size(); ++k) {
        const double t = in.I->times()[k];
        if (t < it->t_start || t > it->t_end) continue;
        const double Iv = in.I->values()[k];
        const double Dv = in.Idot->values()[k];
        if (Iv > 0.0 && Dv > 0.0) {
          a0 = std::min(a0, Dv / std::pow(Iv, 1.0 + delta));
          I_t = Iv;
          t_at = t;
        }
      }
      if (std::isfinite(a0) && a0 > 0.0) {
        cert.event_bound = certify::event_blowup_bound(I_t, delta, a0);
        extras["event_bound"] = {{"value", *cert.event_bound}, {"unit", "s"}, {"from_t", t_at}, {"delta", delta},
                                 {"a0", a0}, {"I_t", I_t}};
      }
      break;
    }
  }

  if (cfg.contains("capital")) {
    const auto capital = stage("dynamics", [&] { return dynamics::CapitalParams::from_json(cfg.at("capital")); });
    const auto lower = stage("dynamics", [&] { return dynamics::capital_lower(capital, 0.0); });
    extras["capital"] = {{"params", capital.to_json()},
                         {"regime", dynamics::to_string(lower.regime)},
                         {"T_K", std::isfinite(lower.T_K) ? json(lower.T_K) : json(nullptr)},
                         {"unit", "s"}};
    const json rf = cfg.value("region", json::object());
    dynamics::RegionFlags flags{rf.value("capped_power", false), rf.value("logistic_data", false),
                                rf.value("baseline_effort_floor", false)};
    double p_rep = rf.value("p", std::numeric_limits<double>::quiet_NaN());
    if (std::isnan(p_rep)) {
      p_rep = -std::numeric_limits<double>::infinity();
      for (const auto& s : segments) p_rep = std::max(p_rep, s.ptot.minus);
    }
    if (std::isfinite(p_rep)) {
      try {
        const auto v = dynamics::classify_region(capital.zeta, p_rep, flags, capital);
        extras["region"] = {{"region", dynamics::to_string(v.region)},
                            {"conclusion", dynamics::to_string(v.conclusion)},
                            {"bound", v.bound ? json(*v.bound) : json(nullptr)},
                            {"p", p_rep},
                            {"note", v.note}};
      } catch (const Error& e) {
        extras["region"] = {{"error", e.what()}};
      }
    }
  }

  extras["units"] = {{"I", "nat"}, {"Idot", "nat/s"}, {"p_tot", "1"}, {"phi_svc", "nat/s"}, {"time", "s"}};
  extras["osgood_value"] = std::isfinite(osgood.value) ? json(osgood.value) : json(nullptr);
  cert.extras = std::move(extras);
  cert.config_echo = cfg;
  cert.data_snapshot_versions = in.versions;

  run.certificate = std::move(cert);
  if (rolling) run.p_hat = rolling->estimates;
  run.envelope = std::move(envelope);
  run.Idot = in.Idot;
  return run;
}

int cmd_certify(const RunOptions& opts, std::ostream& log) {
  const CertifyRun run = run_certify(opts);
  const Certificate& cert = run.certificate;
  write_text(opts.out / "certificate.json", dump(cert.to_json()));
  write_text(opts.out / "report.txt", render_report(cert));
  write_text(opts.out / "p_hat.csv", estimates_csv(run.p_hat));

  std::string slack = "t,capacity,relative_slack,pass\n";
  if (run.envelope) {
    for (Eigen::Index k = 0; k < run.envelope->times.size(); ++k) {
      slack += num(run.envelope->times[k]) + "," + num(run.envelope->capacity[k]) + "," +
               num(run.envelope->relative_slack[k]) + "," + (run.envelope->pass[static_cast<std::size_t>(k)] ? "1" : "0") +
               "\n";
    }
  }
  write_text(opts.out / "envelope_slack.csv", slack);

  std::string segs = "t_start,t_end,ptot_minus,ptot_plus,se_minus,se_plus,superlinearity_reject,superlinearity_margin,"
                     "upper_band_margin,nonbinding\n";
  for (const auto& s : cert.segments) {
    segs += num(s.t_start) + "," + num(s.t_end) + "," + num(s.ptot.minus) + "," + num(s.ptot.plus) + "," +
            num(s.ptot.se_minus) + "," + num(s.ptot.se_plus) + "," + (s.superlinearity.reject ? "1" : "0") + "," +
            num(s.superlinearity.margin) + "," + num(s.upper_band.margin) + "," + (s.envelope_nonbinding ? "1" : "0") +
            "\n";
  }
  write_text(opts.out / "segments.csv", segs);
  log << "verdict: " << to_string(cert.verdict) << "\n";
  return verdict_exit_code(cert.verdict);
}

std::string render_report(const Certificate& cert) {
  std::ostringstream os;
  std::string sources;
  for (const auto& [role, version] : cert.data_snapshot_versions.items()) {
    if (!sources.empty()) sources += ", ";
    sources += role + "@" + short_hash(version.get<std::string>());
  }
  const std::string tag = " [" + sources + "]";
  os << "verdict: " << to_string(cert.verdict) << "\n";
  os << "osgood integral of 1/Phi: " << (cert.osgood_divergent ? "divergent" : "convergent") << tag << "\n";
  if (cert.envelope_pass_fraction) {
    os << "envelope pass fraction: " << short_num(*cert.envelope_pass_fraction) << " (1)" << tag << "\n";
  } else {
    os << "envelope pass fraction: n/a (envelopes disabled)\n";
  }
  for (const auto& s : cert.segments) {
    os << "segment [" << short_num(s.t_start) << " s, " << short_num(s.t_end) << " s]: p_tot- = " << short_num(s.ptot.minus)
       << " (1, se " << short_num(s.ptot.se_minus) << "), p_tot+ = " << short_num(s.ptot.plus) << " (1, se "
       << short_num(s.ptot.se_plus) << "), superlinearity " << (s.superlinearity.reject ? "rejects H0" : "fails to reject")
       << " (margin " << short_num(s.superlinearity.margin) << " (1)), upper band margin "
       << short_num(s.upper_band.margin) << " (1), envelope " << (s.envelope_nonbinding ? "nonbinding" : "binding or unverified");
    if (s.nonbinding_fraction) os << " (nonbinding fraction " << short_num(*s.nonbinding_fraction) << " (1))";
    os << tag << "\n";
  }
  auto margin = [&](const char* name, const std::optional<double>& v) {
    os << name << ": " << (v ? short_num(*v) + " (1)" + tag : std::string("n/a")) << "\n";
  };
  margin("p_tot margin", cert.margins.ptot_margin);
  margin("critical-manifold distance", cert.margins.manifold_distance);
  margin("distribution-shift margin", cert.margins.wasserstein_margin);
  if (cert.event_bound) os << "event blow-up bound: " << short_num(*cert.event_bound) << " s" << tag << "\n";
  if (cert.extras.contains("capital")) {
    const json& c = cert.extras.at("capital");
    os << "capital regime: " << c.at("regime").get<std::string>();
    if (!c.at("T_K").is_null()) os << ", T_K = " << num(c.at("T_K").get<double>()) << " s (from capital parameters)";
    os << "\n";
  }
  if (cert.extras.contains("region") && cert.extras.at("region").contains("region")) {
    os << "parameter region: " << cert.extras.at("region").at("region").get<std::string>() << " -> "
       << cert.extras.at("region").at("conclusion").get<std::string>() << "\n";
  }
  for (const auto& r : cert.reasons) os << "reason: " << r << "\n";
  os << "data snapshot versions:\n";
  for (const auto& [role, version] : cert.data_snapshot_versions.items()) {
    os << "  " << role << ": " << version.get<std::string>() << "\n";
  }
  os << "config:\n" << cert.config_echo.dump(2) << "\n";
  return os.str();
}

int cmd_report(const RunOptions& opts, std::ostream& log) {
  const Certificate cert = Certificate::from_json(read_json(opts.config));
  const std::string text = render_report(cert);
  write_text(opts.out / "report.txt", text);
  log << text;
  return verdict_exit_code(cert.verdict);
}

// --- simulate ------------------------------------------------------------------------

int cmd_simulate(const RunOptions& opts, std::ostream& log) {
  const json sc = read_json(opts.config);
  const std::string kind = sc.value("kind", "");
  json summary{{"kind", kind}};
  std::optional<TimeSeries> trajectory;
  if (kind == "powerlaw") {
    check_keys(sc, {"kind", "I0", "a0", "p", "horizon", "threshold"}, "simulate scenario");
    const double I0 = sc.at("I0").get<double>(), a0 = sc.at("a0").get<double>(), p = sc.at("p").get<double>();
    const double horizon = sc.at("horizon").get<double>(), threshold = sc.value("threshold", 1e12);
    const auto phi = dynamics::PhiSpec::power(p, 1.0, std::min(1.0, I0));
    const auto r = stage("simulate", [&] {
      return dynamics::integrate(dynamics::envelope_rhs([a0](double) { return a0; }, phi), I0, horizon, threshold);
    });
    summary["outcome"] = r.outcome == dynamics::Outcome::BlowupDetected ? "blowup_detected" : "completed";
    summary["t_end"] = r.t_end;
    summary["I_end"] = r.I_end;
    summary["accepted_steps"] = r.accepted_steps;
    if (p > 1.0) {
      const double closed = dynamics::powerlaw_blowup_time(I0, a0, p);
      const double at_threshold = (std::pow(I0, 1.0 - p) - std::pow(threshold, 1.0 - p)) / (a0 * (p - 1.0));
      summary["closed_form_blowup_time"] = closed;
      summary["closed_form_threshold_time"] = at_threshold;
      if (r.outcome == dynamics::Outcome::BlowupDetected) {
        summary["relative_error"] = std::abs(r.t_end - at_threshold) / at_threshold;
      }
    }
    trajectory = r.trajectory;
  } else if (kind == "envelope") {
    check_keys(sc, {"kind", "phi", "a", "I0", "horizon", "threshold"}, "simulate scenario");
    const auto phi = stage("simulate", [&] { return dynamics::PhiSpec::from_json(sc.at("phi")); });
    const double a = sc.value("a", 1.0);
    const auto r = stage("simulate", [&] {
      return dynamics::integrate(dynamics::envelope_rhs([a](double) { return a; }, phi), sc.at("I0").get<double>(),
                                 sc.at("horizon").get<double>(), sc.value("threshold", 1e12));
    });
    const auto og = dynamics::osgood_classify(phi, std::max(phi.domain_floor(), sc.at("I0").get<double>()));
    summary["outcome"] = r.outcome == dynamics::Outcome::BlowupDetected ? "blowup_detected" : "completed";
    summary["t_end"] = r.t_end;
    summary["I_end"] = r.I_end;
    summary["osgood_divergent"] = og.divergent;
    if (!og.divergent) summary["osgood_blowup_time"] = og.value / a;
    trajectory = r.trajectory;
  } else if (kind == "discrete") {
    check_keys(sc, {"kind", "I0", "a", "p", "threshold"}, "simulate scenario");
    const auto r = stage("simulate", [&] {
      return dynamics::discrete_rsi(sc.at("I0").get<double>(), sc.at("a").get<double>(), sc.at("p").get<double>(),
                                    sc.value("threshold", 1e12));
    });
    summary["outcome"] = "threshold_reached";
    summary["steps_to_threshold"] = r.steps_to_threshold;
    summary["index_at_threshold"] = r.index_at_threshold;
    summary["published_step_bound"] = r.published_step_bound;
    summary["bound_respected"] = r.bound_respected;
    summary["discrepancy"] = r.discrepancy;
    summary["sequence"] = r.sequence;
  } else {
    throw Error(ErrorCode::ConfigError, "simulate: unknown scenario kind '" + kind + "'");
  }
  if (trajectory) {
    if (opts.format == "csv") {
      write_text(opts.out / "trajectory.csv", series::to_csv(*trajectory));
    } else {
      write_text(opts.out / "trajectory.json", dump(series::to_json(*trajectory)));
    }
  }
  write_text(opts.out / "simulation.json", dump(summary));
  log << "simulation: " << summary.at("outcome").get<std::string>() << "\n";
  return kExitOk;
}

int cmd_control_sim(const RunOptions& opts, std::ostream& log) {
  const json cfg = read_json(opts.config);
  check_keys(cfg, {"plant", "control"}, "control-sim config");
  const auto plant = stage("control-sim", [&] { return safectl::PlantScenario::from_json(cfg.at("plant")); });
  const auto control = stage("control-sim", [&] { return ControlConfig::from_json(cfg.at("control")); });
  const auto result = stage("control-sim", [&] { return safectl::supervise(plant, control); });
  write_text(opts.out / "run_log.jsonl", result.to_jsonl());
  std::size_t escalations = 0;
  for (const auto& r : result.log) escalations += r.action == safectl::Action::Escalate ? 1 : 0;
  const json summary{{"final_status", result.final_status},
                     {"steps", result.log.size()},
                     {"max_overshoot", std::isfinite(result.max_overshoot) ? json(result.max_overshoot) : json(nullptr)},
                     {"documented_margin", control.kappa * control.eps_I + control.L_h * control.tau_bar},
                     {"escalations", escalations},
                     {"unit", "nat"}};
  write_text(opts.out / "control_summary.json", dump(summary));
  log << "control-sim: " << result.final_status << ", max overshoot " << short_num(result.max_overshoot) << " nat\n";
  return kExitOk;
}

}  // namespace rsicert::pipeline
