#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hyssra/errors.hpp"
#include "hyssra/mhsac/train_loop.hpp"

namespace hyssra::experiment {

using mhsac::StepRecord;

inline constexpr double kEwmaFactor = 0.2;
inline constexpr std::size_t kTrailingWindow = 100;
inline constexpr std::size_t kSummaryWindow = 1000;

/// EWMA_t = f x_t + (1 - f) EWMA_{t-1}, EWMA_0 = x_0.
inline std::vector<double> ewma(const std::vector<double>& x, double factor = kEwmaFactor) {
  std::vector<double> out;
  out.reserve(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    out.push_back(t == 0 ? x[0] : factor * x[t] + (1.0 - factor) * out.back());
  }
  return out;
}

/// Mean of rows t - window + 1 .. t; empty until `window` rows exist.
inline std::vector<std::optional<double>> trailing_mean(const std::vector<double>& x,
                                                        std::size_t window = kTrailingWindow) {
  if (window == 0) throw InputError("trailing_mean: window must be >= 1");
  std::vector<std::optional<double>> out(x.size());
  for (std::size_t t = window - 1; t < x.size(); ++t) {
    double sum = 0.0;
    for (std::size_t i = t + 1 - window; i <= t; ++i) sum += x[i];
    out[t] = sum / static_cast<double>(window);
  }
  return out;
}

/// Mean of the last min(window, size) entries.
inline double tail_mean(const std::vector<double>& x, std::size_t window) {
  if (x.empty()) return 0.0;
  const std::size_t n = std::min(window, x.size());
  double sum = 0.0;
  for (std::size_t i = x.size() - n; i < x.size(); ++i) sum += x[i];
  return sum / static_cast<double>(n);
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

/// Named always-present series of a log, in column order.
inline std::vector<std::pair<std::string, std::vector<double>>> metric_series(const std::vector<StepRecord>& rows,
                                                                               int su_count) {
  std::vector<std::pair<std::string, std::vector<double>>> cols;
  auto add = [&](std::string name, auto get) {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(get(r));
    cols.emplace_back(std::move(name), std::move(v));
  };
  add("reward", [](const StepRecord& r) { return r.reward; });
  add("omega_idle", [](const StepRecord& r) { return r.metrics.idle_use; });
  add("omega_occupied", [](const StepRecord& r) { return r.metrics.occupied_use; });
  add("omega_collisions", [](const StepRecord& r) { return r.metrics.collisions; });
  for (int n = 0; n < su_count; ++n) {
    add("power_su" + std::to_string(n) + "_W", [n](const StepRecord& r) { return r.powers.at(static_cast<std::size_t>(n)); });
  }
  add("alpha_discrete", [](const StepRecord& r) { return r.alpha_discrete; });
  add("alpha_continuous", [](const StepRecord& r) { return r.alpha_continuous; });
  return cols;
}

inline std::string raw_header(int su_count) {
  std::string h = "step,reward,omega_idle,omega_occupied,omega_collisions";
  for (int n = 0; n < su_count; ++n) h += ",power_su" + std::to_string(n) + "_W";
  h += ",critic_loss,actor_loss,alpha_discrete_loss,alpha_continuous_loss,alpha_discrete,alpha_continuous";
  return h;
}

inline std::string raw_row(const StepRecord& r) {
  std::string s = std::to_string(r.step) + "," + format_double(r.reward) + "," + format_double(r.metrics.idle_use) +
                  "," + format_double(r.metrics.occupied_use) + "," + format_double(r.metrics.collisions);
  for (double p : r.powers) s += "," + format_double(p);
  s += "," + format_optional(r.critic_loss) + "," + format_optional(r.actor_loss) + "," +
       format_optional(r.alpha_discrete_loss) + "," + format_optional(r.alpha_continuous_loss) + "," +
       format_double(r.alpha_discrete) + "," + format_double(r.alpha_continuous);
  return s;
}

inline void write_raw_csv(std::ostream& out, const std::vector<StepRecord>& rows, int su_count) {
  out << raw_header(su_count) << '\n';
  for (const auto& r : rows) out << raw_row(r) << '\n';
}

/// step, then <name>_ewma and <name>_trailing100 for every metric series.
inline void write_smoothed_csv(std::ostream& out, const std::vector<StepRecord>& rows, int su_count) {
  const auto series = metric_series(rows, su_count);
  std::vector<std::vector<double>> ew;
  std::vector<std::vector<std::optional<double>>> tr;
  out << "step";
  for (const auto& [name, values] : series) {
    out << ',' << name << "_ewma," << name << "_trailing" << kTrailingWindow;
    ew.push_back(ewma(values));
    tr.push_back(trailing_mean(values));
  }
  out << '\n';
  for (std::size_t t = 0; t < rows.size(); ++t) {
    out << rows[t].step;
    for (std::size_t c = 0; c < series.size(); ++c) out << ',' << format_double(ew[c][t]) << ',' << format_optional(tr[c][t]);
    out << '\n';
  }
}

/// Writes <dir>/metrics.csv and <dir>/metrics_smoothed.csv.
inline void emit_metrics(const std::vector<StepRecord>& rows, int su_count, const std::filesystem::path& dir) {
  if (rows.empty()) throw InputError("emit_metrics: empty log");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  for (const auto& [name, smoothed] : {std::pair{"metrics.csv", false}, std::pair{"metrics_smoothed.csv", true}}) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("emit_metrics: cannot write " + (dir / name).string());
    if (smoothed) {
      write_smoothed_csv(out, rows, su_count);
    } else {
      write_raw_csv(out, rows, su_count);
    }
    if (!out) throw std::runtime_error("emit_metrics: write failed for " + (dir / name).string());
  }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw InputError("metrics csv: bad number '" + s + "'");
  return v;
}

inline std::optional<double> parse_optional(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

}  // namespace detail

/// Inverse of write_raw_csv.
inline std::vector<StepRecord> parse_raw_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("metrics csv: missing header");
  const auto header = detail::split_csv_line(line);
  int su_count = 0;
  for (const auto& h : header) {
    if (h.rfind("power_su", 0) == 0) ++su_count;
  }
  if (line != raw_header(su_count)) throw InputError("metrics csv: unexpected header");
  const std::size_t width = header.size();
  std::vector<StepRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != width) throw InputError("metrics csv: row has the wrong number of cells");
    StepRecord r;
    std::size_t c = 0;
    r.step = std::stoll(cells[c++]);
    r.reward = detail::parse_double(cells[c++]);
    r.metrics.idle_use = detail::parse_double(cells[c++]);
    r.metrics.occupied_use = detail::parse_double(cells[c++]);
    r.metrics.collisions = detail::parse_double(cells[c++]);
    for (int n = 0; n < su_count; ++n) r.powers.push_back(detail::parse_double(cells[c++]));
    r.critic_loss = detail::parse_optional(cells[c++]);
    r.actor_loss = detail::parse_optional(cells[c++]);
    r.alpha_discrete_loss = detail::parse_optional(cells[c++]);
    r.alpha_continuous_loss = detail::parse_optional(cells[c++]);
    r.alpha_discrete = detail::parse_double(cells[c++]);
    r.alpha_continuous = detail::parse_double(cells[c++]);
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Trailing-1000-step means of every metric series and of each loss over the
/// rows where it was computed.
inline nlohmann::json summarize(const std::vector<StepRecord>& rows, int su_count) {
  nlohmann::json means = nlohmann::json::object();
  for (const auto& [name, values] : metric_series(rows, su_count)) means[name] = tail_mean(values, kSummaryWindow);
  const std::size_t start = rows.size() > kSummaryWindow ? rows.size() - kSummaryWindow : 0;
  auto loss_mean = [&](std::optional<double> StepRecord::*field) -> nlohmann::json {
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = start; i < rows.size(); ++i) {
      if (const auto& v = rows[i].*field) {
        sum += *v;
        ++count;
      }
    }
    return count > 0 ? nlohmann::json(sum / count) : nlohmann::json(nullptr);
  };
  means["critic_loss"] = loss_mean(&StepRecord::critic_loss);
  means["actor_loss"] = loss_mean(&StepRecord::actor_loss);
  means["alpha_discrete_loss"] = loss_mean(&StepRecord::alpha_discrete_loss);
  means["alpha_continuous_loss"] = loss_mean(&StepRecord::alpha_continuous_loss);
  return {{"window", std::min(kSummaryWindow, rows.size())}, {"steps", rows.size()}, {"means", means}};
}

}  // namespace hyssra::experiment
