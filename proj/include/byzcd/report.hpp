#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "byzcd/montecarlo.hpp"

namespace byzcd {

/// Shortest decimal text that parses back to the same double.
inline std::string format_real(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw std::runtime_error("cannot format number");
  return std::string(buf.data(), ptr);
}

inline double parse_real_field(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::invalid_argument("bad numeric field '" + s + "'");
  return v;
}

template <class Int>
Int parse_int_field(const std::string& s) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::invalid_argument("bad integer field '" + s + "'");
  return v;
}

inline constexpr const char* frontier_csv_header =
    "rule,kind,L,K,M,B_size,gamma,log_gamma,threshold,arl_mean,arl_se,delay_mean,delay_se,delay_norm,censored,reps,seed";

/// One line of the frontier table, as written to and read from CSV.
struct FrontierRecord {
  std::string rule;
  std::string kind;
  int L = 0, K = 0, M = 0, B_size = 0;
  double gamma = 0, log_gamma = 0, threshold = 0, arl_mean = 0, arl_se = 0, delay_mean = 0, delay_se = 0, delay_norm = 0;
  std::size_t censored = 0, reps = 0;
  std::uint64_t seed = 0;

  bool operator==(const FrontierRecord&) const = default;
};

inline FrontierRecord to_record(const FrontierRow& r) {
  FrontierRecord x;
  x.rule = r.rule_name;
  x.kind = std::string(to_string(r.rule.kind));
  x.L = r.rule.L;
  x.K = r.K;
  x.M = r.M;
  x.B_size = r.B_size;
  x.gamma = r.gamma;
  x.log_gamma = r.log_gamma;
  x.threshold = r.threshold;
  x.arl_mean = r.arl.mean;
  x.arl_se = r.arl.standard_error;
  x.delay_mean = r.delay.mean;
  x.delay_se = r.delay.standard_error;
  x.delay_norm = r.delay_norm;
  x.censored = r.delay.censored + r.arl.censored;
  x.reps = r.delay.n;
  x.seed = r.seed;
  return x;
}

inline void write_frontier_csv(std::ostream& out, const std::vector<FrontierRecord>& rows) {
  out << frontier_csv_header << '\n';
  for (const auto& r : rows) {
    out << r.rule << ',' << r.kind << ',' << r.L << ',' << r.K << ',' << r.M << ',' << r.B_size << ','
        << format_real(r.gamma) << ',' << format_real(r.log_gamma) << ',' << format_real(r.threshold) << ','
        << format_real(r.arl_mean) << ',' << format_real(r.arl_se) << ',' << format_real(r.delay_mean) << ','
        << format_real(r.delay_se) << ',' << format_real(r.delay_norm) << ',' << r.censored << ',' << r.reps << ','
        << r.seed << '\n';
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ls(line);
  while (std::getline(ls, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::vector<FrontierRecord> read_frontier_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != frontier_csv_header) throw std::invalid_argument("frontier CSV header mismatch");
  std::vector<FrontierRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 17) throw std::invalid_argument("frontier CSV row has " + std::to_string(f.size()) + " fields");
    FrontierRecord r;
    r.rule = f[0];
    r.kind = f[1];
    r.L = parse_int_field<int>(f[2]);
    r.K = parse_int_field<int>(f[3]);
    r.M = parse_int_field<int>(f[4]);
    r.B_size = parse_int_field<int>(f[5]);
    r.gamma = parse_real_field(f[6]);
    r.log_gamma = parse_real_field(f[7]);
    r.threshold = parse_real_field(f[8]);
    r.arl_mean = parse_real_field(f[9]);
    r.arl_se = parse_real_field(f[10]);
    r.delay_mean = parse_real_field(f[11]);
    r.delay_se = parse_real_field(f[12]);
    r.delay_norm = parse_real_field(f[13]);
    r.censored = parse_int_field<std::size_t>(f[14]);
    r.reps = parse_int_field<std::size_t>(f[15]);
    r.seed = parse_int_field<std::uint64_t>(f[16]);
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Plot data: one block per rule (blank-line separated, gnuplot `index`),
/// columns log_gamma, delay, ci_lo, ci_hi, delay_norm.
inline void write_plot_data(std::ostream& out, const std::vector<FrontierRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const FrontierRow*>> series;
  for (const auto& r : rows) {
    if (!series.count(r.rule_name)) order.push_back(r.rule_name);
    series[r.rule_name].push_back(&r);
  }
  bool first = true;
  for (const auto& name : order) {
    if (!first) out << "\n\n";
    first = false;
    const auto& s = series[name];
    out << "# rule " << name << " (" << to_string(s.front()->rule.kind) << " L=" << s.front()->rule.L << ")\n";
    out << "# log_gamma delay delay_ci_lo delay_ci_hi delay_norm\n";
    for (const FrontierRow* r : s)
      out << format_real(r->log_gamma) << ' ' << format_real(r->delay.mean) << ' ' << format_real(r->delay.ci95.lo) << ' '
          << format_real(r->delay.ci95.hi) << ' ' << format_real(r->delay_norm) << '\n';
  }
}

inline constexpr const char* calibration_csv_header =
    "rule,kind,L,K,M,B_size,gamma,log_gamma,threshold,arl_mean,arl_se,arl_censored,reps,evaluations,seed,status,reason";

}  // namespace byzcd
