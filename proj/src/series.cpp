#include "rsicert/series.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rsicert/error.hpp"
#include "rsicert/hac.hpp"

namespace rsicert {

TimeSeries::TimeSeries(std::string name, std::string unit, Eigen::VectorXd times, Eigen::VectorXd values,
                       std::optional<Eigen::VectorXd> quality, std::string snapshot_version)
    : name_(std::move(name)),
      unit_(std::move(unit)),
      snapshot_version_(std::move(snapshot_version)),
      times_(std::move(times)),
      values_(std::move(values)),
      quality_(std::move(quality)) {
  if (times_.size() == 0) throw Error(ErrorCode::InvalidSeries, "series '" + name_ + "' is empty");
  if (times_.size() != values_.size()) throw Error(ErrorCode::InvalidSeries, "time/value length mismatch");
  if (quality_ && quality_->size() != times_.size()) {
    throw Error(ErrorCode::InvalidSeries, "quality length mismatch");
  }
  for (Eigen::Index i = 0; i < times_.size(); ++i) {
    if (!std::isfinite(times_[i]) || !std::isfinite(values_[i])) {
      throw Error(ErrorCode::InvalidSeries, "non-finite sample at index " + std::to_string(i) + " of '" + name_ + "'");
    }
    if (i > 0 && !(times_[i] > times_[i - 1])) {
      throw Error(ErrorCode::NonMonotoneTime, "timestamps not strictly increasing at index " + std::to_string(i) +
                                                  " of '" + name_ + "'");
    }
    if (quality_ && !((*quality_)[i] >= 0.0 && (*quality_)[i] <= 1.0)) {
      throw Error(ErrorCode::InvalidSeries, "quality outside [0,1] at index " + std::to_string(i));
    }
  }
}

TimeSeries TimeSeries::from_samples(std::string name, std::string unit, std::span<const Sample> samples,
                                    std::string snapshot_version) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::VectorXd t(n), v(n), q(n);
  bool any_quality = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    t[i] = s.t;
    v[i] = s.value;
    q[i] = s.quality.value_or(1.0);
    any_quality = any_quality || s.quality.has_value();
  }
  std::optional<Eigen::VectorXd> quality;
  if (any_quality) quality = std::move(q);
  return TimeSeries(std::move(name), std::move(unit), std::move(t), std::move(v), std::move(quality),
                    std::move(snapshot_version));
}

Eigen::VectorXd TimeSeries::weights() const {
  return quality_ ? *quality_ : Eigen::VectorXd::Ones(times_.size());
}

Sample TimeSeries::sample(Eigen::Index i) const {
  Sample s{times_[i], values_[i], std::nullopt};
  if (quality_) s.quality = (*quality_)[i];
  return s;
}

TimeSeries TimeSeries::with_values(Eigen::VectorXd values, std::string name, std::string unit) const {
  return TimeSeries(std::move(name), std::move(unit), times_, std::move(values), quality_, snapshot_version_);
}

TimeSeries TimeSeries::with_version(std::string snapshot_version) const {
  return TimeSeries(name_, unit_, times_, values_, quality_, std::move(snapshot_version));
}

bool TimeSeries::same_grid(const TimeSeries& other) const {
  return times_.size() == other.times_.size() && times_ == other.times_;
}

bool operator==(const TimeSeries& a, const TimeSeries& b) {
  if (a.name_ != b.name_ || a.unit_ != b.unit_ || a.snapshot_version_ != b.snapshot_version_) return false;
  if (!a.same_grid(b) || a.values_ != b.values_) return false;
  if (a.quality_.has_value() != b.quality_.has_value()) return false;
  return !a.quality_ || *a.quality_ == *b.quality_;
}

namespace series {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool parse_int(std::string_view s, int& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double parse_timestamp(std::string_view text) {
  text = trim(text);
  double numeric = 0.0;
  if (parse_double(text, numeric)) return numeric;

  // YYYY-MM-DDTHH:MM:SS[.fff](Z|+HH:MM|-HH:MM)
  auto fail = [&] { return Error(ErrorCode::ParseError, "bad timestamp '" + std::string(text) + "'"); };
  if (text.size() < 20 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != 't' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':') {
    throw fail();
  }
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!parse_int(text.substr(0, 4), year) || !parse_int(text.substr(5, 2), month) ||
      !parse_int(text.substr(8, 2), day) || !parse_int(text.substr(11, 2), hour) ||
      !parse_int(text.substr(14, 2), minute) || !parse_int(text.substr(17, 2), second)) {
    throw fail();
  }
  std::size_t pos = 19;
  double frac = 0.0;
  if (pos < text.size() && text[pos] == '.') {
    std::size_t end = pos + 1;
    while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
    if (end == pos + 1 || !parse_double(std::string("0") + std::string(text.substr(pos, end - pos)), frac)) {
      throw fail();
    }
    pos = end;
  }
  if (pos >= text.size()) throw fail();
  int offset_seconds = 0;
  if (text[pos] == 'Z' || text[pos] == 'z') {
    if (pos + 1 != text.size()) throw fail();
  } else if ((text[pos] == '+' || text[pos] == '-') && text.size() == pos + 6 && text[pos + 3] == ':') {
    int oh = 0, om = 0;
    if (!parse_int(text.substr(pos + 1, 2), oh) || !parse_int(text.substr(pos + 4, 2), om)) throw fail();
    offset_seconds = (oh * 3600 + om * 60) * (text[pos] == '-' ? -1 : 1);
  } else {
    throw fail();
  }
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) throw fail();
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<double>(days) * 86400.0 + hour * 3600.0 + minute * 60.0 + second + frac - offset_seconds;
}

std::string content_hash(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

TimeSeries parse_csv(std::string_view text, std::string name, std::string_view expected_unit) {
  std::optional<std::string> unit;
  bool header_seen = false;
  bool has_quality = false;
  std::vector<Sample> samples;
  std::size_t line_no = 0;
  std::size_t start = 0;
  auto parse_error = [&](const std::string& what) {
    return Error(ErrorCode::ParseError, name + " line " + std::to_string(line_no) + ": " + what);
  };

  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      auto body = trim(line.substr(1));
      if (body.starts_with("unit=")) unit = std::string(trim(body.substr(5)));
      continue;
    }
    if (!header_seen) {
      const auto cols = split_commas(line);
      if (cols.size() == 2 && cols[0] == "t" && cols[1] == "value") {
        has_quality = false;
      } else if (cols.size() == 3 && cols[0] == "t" && cols[1] == "value" && cols[2] == "quality") {
        has_quality = true;
      } else {
        throw parse_error("expected header 't,value[,quality]'");
      }
      header_seen = true;
      continue;
    }
    const auto cols = split_commas(line);
    if (cols.size() != (has_quality ? 3u : 2u)) throw parse_error("wrong column count");
    Sample s;
    try {
      s.t = parse_timestamp(cols[0]);
    } catch (const Error&) {
      throw parse_error("bad timestamp '" + std::string(cols[0]) + "'");
    }
    if (!parse_double(cols[1], s.value) || !std::isfinite(s.value)) {
      throw parse_error("bad value '" + std::string(cols[1]) + "'");
    }
    if (has_quality) {
      double q = 0.0;
      if (!parse_double(cols[2], q) || !(q >= 0.0 && q <= 1.0)) {
        throw parse_error("quality must be a number in [0,1]");
      }
      s.quality = q;
    }
    if (!samples.empty() && !(s.t > samples.back().t)) {
      throw Error(ErrorCode::NonMonotoneTime,
                  name + " line " + std::to_string(line_no) + ": timestamp does not increase");
    }
    samples.push_back(s);
  }
  if (!unit) throw Error(ErrorCode::ParseError, name + ": missing '# unit=<unit>' line");
  if (!header_seen) throw Error(ErrorCode::ParseError, name + ": missing header line");
  if (samples.empty()) throw Error(ErrorCode::ParseError, name + ": no data rows");
  if (!expected_unit.empty() && *unit != expected_unit) {
    throw Error(ErrorCode::UnitMismatch,
                name + ": file declares unit '" + *unit + "', expected '" + std::string(expected_unit) + "'");
  }
  return TimeSeries::from_samples(std::move(name), *unit, samples, content_hash(text));
}

TimeSeries ingest_csv(const std::filesystem::path& path, std::string_view expected_unit) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), path.stem().string(), expected_unit);
}

std::string to_csv(const TimeSeries& x) {
  std::string out = "# unit=" + x.unit() + "\n";
  out += x.has_quality() ? "t,value,quality\n" : "t,value\n";
  const Eigen::VectorXd q = x.weights();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out += format_double(x.times()[i]) + "," + format_double(x.values()[i]);
    if (x.has_quality()) out += "," + format_double(q[i]);
    out += "\n";
  }
  return out;
}

nlohmann::json to_json(const TimeSeries& x) {
  nlohmann::json samples = nlohmann::json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const Sample s = x.sample(i);
    nlohmann::json js = {{"t", s.t}, {"value", s.value}};
    if (s.quality) js["quality"] = *s.quality;
    samples.push_back(std::move(js));
  }
  return {{"name", x.name()}, {"unit", x.unit()}, {"snapshot_version", x.snapshot_version()},
          {"samples", std::move(samples)}};
}

TimeSeries from_json(const nlohmann::json& j) {
  try {
    std::vector<Sample> samples;
    for (const auto& js : j.at("samples")) {
      Sample s{js.at("t").get<double>(), js.at("value").get<double>(), std::nullopt};
      if (js.contains("quality")) s.quality = js.at("quality").get<double>();
      samples.push_back(s);
    }
    return TimeSeries::from_samples(j.at("name").get<std::string>(), j.at("unit").get<std::string>(), samples,
                                    j.value("snapshot_version", std::string{}));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("series JSON: ") + e.what());
  }
}

Eigen::VectorXd kernel_weights(const TimeSeries& x, double center_t, double half_width) {
  const Eigen::ArrayXd u = (x.times().array() - center_t) / half_width;
  const Eigen::ArrayXd k = (u.abs() < 1.0).select(0.75 * (1.0 - u.square()), 0.0);
  return (k * x.weights().array()).matrix();
}

namespace {

Eigen::Index count_positive(const Eigen::VectorXd& w) { return (w.array() > 0.0).count(); }

}  // namespace

SlopePoint log_slope(const TimeSeries& x, double window, double center_t) {
  if (!(window > 0.0)) throw Error(ErrorCode::InvalidParams, "window must be positive");
  const double h = 0.5 * window;
  const Eigen::VectorXd w = kernel_weights(x, center_t, h);
  if (count_positive(w) < 3) {
    throw Error(ErrorCode::InsufficientWindow, "fewer than 3 weighted samples around t=" + std::to_string(center_t));
  }
  Eigen::VectorXd logv(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (w[i] > 0.0 && !(x.values()[i] > 0.0)) {
      throw Error(ErrorCode::NonPositiveValue, "non-positive value in window of '" + x.name() + "'");
    }
    logv[i] = w[i] > 0.0 ? std::log(x.values()[i]) : 0.0;
  }
  const LineFit fit = fit_weighted_line(x.times(), logv, w, 0);
  return {center_t, fit.slope, fit.se_slope, h};
}

SlopeSeries elasticity(const TimeSeries& y, const TimeSeries& x, double window) {
  if (!y.same_grid(x)) throw Error(ErrorCode::GridMismatch, "'" + y.name() + "' and '" + x.name() + "' grids differ");
  if (!(window > 0.0)) throw Error(ErrorCode::InvalidParams, "window must be positive");
  if ((y.values().array() <= 0.0).any() || (x.values().array() <= 0.0).any()) {
    throw Error(ErrorCode::NonPositiveValue, "elasticity needs positive series");
  }
  const double h = 0.5 * window;
  const Eigen::VectorXd logy = y.values().array().log();
  const Eigen::VectorXd logx = x.values().array().log();
  const Eigen::VectorXd qy = y.weights();

  SlopeSeries out;
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    const Eigen::VectorXd w = kernel_weights(x, x.times()[c], h).cwiseProduct(qy);
    if (count_positive(w) < 3) continue;
    const double wsum = w.sum();
    const double mean = w.dot(logx) / wsum;
    const double var = (w.array() * (logx.array() - mean).square()).sum() / wsum;
    if (var < kDegenerateVarianceTol) {
      throw Error(ErrorCode::DegenerateRegressor,
                  "Var(log " + x.name() + ") below tolerance around t=" + std::to_string(x.times()[c]));
    }
    const LineFit fit = fit_weighted_line(logx, logy, w, 0);
    out.push_back({x.times()[c], fit.slope, fit.se_slope, h});
  }
  return out;
}

double interpolate(const TimeSeries& x, double t) {
  const auto& ts = x.times();
  if (!(t >= ts[0] && t <= ts[ts.size() - 1])) {
    throw Error(ErrorCode::OutOfRange, "t=" + std::to_string(t) + " outside the range of '" + x.name() + "'");
  }
  const auto* begin = ts.data();
  const auto* end = ts.data() + ts.size();
  const auto* it = std::lower_bound(begin, end, t);
  const auto i = static_cast<Eigen::Index>(it - begin);
  if (ts[i] == t) return x.values()[i];
  const double frac = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
  return x.values()[i - 1] + frac * (x.values()[i] - x.values()[i - 1]);
}

TimeSeries resample(const TimeSeries& x, double step, std::optional<double> start, std::optional<double> end) {
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidParams, "grid step must be positive");
  const double t0 = start.value_or(x.front_time());
  const double t1 = end.value_or(x.back_time());
  if (t0 < x.front_time() || t1 > x.back_time() || t1 < t0) {
    throw Error(ErrorCode::OutOfRange, "requested grid outside the range of '" + x.name() + "'");
  }
  // Tolerate the last grid point landing a rounding error past t1.
  const auto n = static_cast<Eigen::Index>(std::floor((t1 - t0) / step * (1.0 + 1e-12))) + 1;
  Eigen::VectorXd t(n), v(n), q(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    t[k] = std::min(t0 + static_cast<double>(k) * step, x.back_time());
    v[k] = interpolate(x, t[k]);
  }
  std::optional<Eigen::VectorXd> quality;
  if (x.has_quality()) {
    const TimeSeries qs = x.with_values(x.weights(), x.name(), "dimensionless");
    for (Eigen::Index k = 0; k < n; ++k) q[k] = interpolate(qs, t[k]);
    quality = std::move(q);
  }
  return TimeSeries(x.name(), x.unit(), std::move(t), std::move(v), std::move(quality), x.snapshot_version());
}

TimeSeries effective_dataset(const TimeSeries& d_real, const TimeSeries& d_synth, double rho_syn) {
  if (!(rho_syn >= 0.0 && rho_syn <= 1.0)) throw Error(ErrorCode::RhoOutOfRange, "rho_syn must lie in [0,1]");
  if (!d_real.same_grid(d_synth)) throw Error(ErrorCode::GridMismatch, "real and synthetic data grids differ");
  if (d_real.unit() != d_synth.unit()) {
    throw Error(ErrorCode::UnitMismatch, "real data in '" + d_real.unit() + "', synthetic in '" + d_synth.unit() + "'");
  }
  return d_real.with_values(d_real.values() + rho_syn * d_synth.values(), "D_eff", d_real.unit());
}

}  // namespace series
}  // namespace rsicert
