#include "rllab/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "rllab/errors.hpp"

namespace rllab {

std::string format_metric(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

MetricsWriter::MetricsWriter(const std::string& path) : os_(path) {
  if (!os_) throw ValidationError("cannot open metrics file for writing: " + path);
  os_ << kMetricsHeader << '\n';
  os_.flush();
}

void MetricsWriter::write(const MetricsRow& row) {
  os_ << row.step << ',' << format_metric(row.eval_return) << ',' << format_metric(row.critic_loss)
      << ',' << format_metric(row.actor_loss) << ',' << format_metric(row.lambda) << ','
      << format_metric(row.r_min) << ',' << row.be_trajs << '\n';
  os_.flush();
  if (!os_) throw ValidationError("metrics write failed");
}

namespace {

double parse_field(const std::string& s, const std::string& path, std::size_t lineno) {
  if (s == "nan") return std::nan("");
  try {
    std::size_t pos = 0;
    const double d = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ValidationError(path + ": bad metric value '" + s + "' on line " +
                          std::to_string(lineno));
  }
}

}  // namespace

std::vector<MetricsRow> load_metrics(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open metrics file: " + path);
  std::string line;
  if (!std::getline(is, line)) throw ValidationError(path + ": empty metrics file");
  if (line == std::string(kMetricsHeader) + "\r") line.pop_back();
  if (line != kMetricsHeader)
    throw ValidationError(path + ": unexpected header '" + line + "'");
  std::vector<MetricsRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    lineno += 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 7)
      throw ValidationError(path + ": expected 7 fields on line " + std::to_string(lineno) +
                            ", got " + std::to_string(fields.size()));
    MetricsRow row;
    row.step = static_cast<std::uint64_t>(parse_field(fields[0], path, lineno));
    row.eval_return = parse_field(fields[1], path, lineno);
    row.critic_loss = parse_field(fields[2], path, lineno);
    row.actor_loss = parse_field(fields[3], path, lineno);
    row.lambda = parse_field(fields[4], path, lineno);
    row.r_min = parse_field(fields[5], path, lineno);
    row.be_trajs = static_cast<std::size_t>(parse_field(fields[6], path, lineno));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace rllab
