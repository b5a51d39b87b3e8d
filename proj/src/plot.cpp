#include "rllab/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rllab/errors.hpp"

namespace rllab {

namespace {

constexpr double kWidth = 960, kHeight = 540;
constexpr double kLeft = 72, kRight = 24, kTop = 48, kBottom = 56;

const char* kPalette[] = {"#4363d8", "#e6194b", "#3cb44b", "#f58231",
                          "#911eb4", "#42d4f4", "#f032e6", "#9a6324"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string coord(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// Tick positions at a 1/2/5 x 10^k spacing covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
  const double span = hi - lo;
  const double raw = span / std::max(1, target);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (const double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step)
    ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  return ticks;
}

struct SeriesStats {
  std::vector<double> steps, mean, lo, hi;
};

SeriesStats reduce_series(const PlotSeries& s) {
  if (s.runs.empty()) throw ValidationError("plot: series '" + s.label + "' has no runs");
  const std::vector<MetricsRow>& first = s.runs.front();
  if (first.empty()) throw ValidationError("plot: series '" + s.label + "' has an empty run");
  for (const auto& run : s.runs) {
    if (run.size() != first.size())
      throw ValidationError("plot: series '" + s.label + "' mixes eval grids");
    for (std::size_t i = 0; i < run.size(); ++i)
      if (run[i].step != first[i].step)
        throw ValidationError("plot: series '" + s.label + "' mixes eval grids");
  }
  SeriesStats out;
  for (std::size_t i = 0; i < first.size(); ++i) {
    double sum = 0.0, lo = first[i].eval_return, hi = lo;
    for (const auto& run : s.runs) {
      const double v = run[i].eval_return;
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out.steps.push_back(static_cast<double>(first[i].step));
    out.mean.push_back(sum / static_cast<double>(s.runs.size()));
    out.lo.push_back(lo);
    out.hi.push_back(hi);
  }
  return out;
}

}  // namespace

std::string render_reward_svg(const std::vector<PlotSeries>& series, const std::string& title) {
  if (series.empty()) throw ValidationError("plot: no series given");
  std::vector<SeriesStats> stats;
  stats.reserve(series.size());
  for (const PlotSeries& s : series) stats.push_back(reduce_series(s));

  double x0 = stats[0].steps.front(), x1 = x0;
  double y0 = stats[0].lo.front(), y1 = stats[0].hi.front();
  for (const SeriesStats& st : stats) {
    for (const double x : st.steps) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
    }
    for (std::size_t i = 0; i < st.lo.size(); ++i) {
      y0 = std::min(y0, st.lo[i]);
      y1 = std::max(y1, st.hi[i]);
    }
  }
  if (x1 == x0) {
    x0 -= 1.0;
    x1 += 1.0;
  }
  if (y1 == y0) {
    y0 -= 1.0;
    y1 += 1.0;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  const auto py = [&](double y) { return kTop + (y1 - y) / (y1 - y0) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"28\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"18\">" << title << "</text>\n";

  // grid and ticks
  svg << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333333\">\n";
  for (const double t : nice_ticks(x0, x1)) {
    const double x = px(t);
    svg << "<line x1=\"" << coord(x) << "\" y1=\"" << coord(kTop) << "\" x2=\"" << coord(x)
        << "\" y2=\"" << coord(kTop + ph) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << coord(x) << "\" y=\"" << coord(kTop + ph + 18)
        << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
  }
  for (const double t : nice_ticks(y0, y1)) {
    const double y = py(t);
    svg << "<line x1=\"" << coord(kLeft) << "\" y1=\"" << coord(y) << "\" x2=\""
        << coord(kLeft + pw) << "\" y2=\"" << coord(y) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << coord(kLeft - 8) << "\" y=\"" << coord(y + 4)
        << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
  }
  svg << "<text x=\"" << coord(kLeft + pw / 2) << "\" y=\"" << coord(kHeight - 12)
      << "\" text-anchor=\"middle\">environment steps</text>\n";
  svg << "<text x=\"18\" y=\"" << coord(kTop + ph / 2)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << coord(kTop + ph / 2)
      << ")\">evaluation return</text>\n";
  svg << "</g>\n";
  svg << "<rect x=\"" << coord(kLeft) << "\" y=\"" << coord(kTop) << "\" width=\"" << coord(pw)
      << "\" height=\"" << coord(ph) << "\" fill=\"none\" stroke=\"#333333\"/>\n";

  for (std::size_t k = 0; k < stats.size(); ++k) {
    const SeriesStats& st = stats[k];
    const char* color = kPalette[k % kPaletteSize];
    if (series[k].runs.size() > 1) {
      svg << "<path d=\"M";
      for (std::size_t i = 0; i < st.steps.size(); ++i)
        svg << (i ? " L" : "") << coord(px(st.steps[i])) << " " << coord(py(st.hi[i]));
      for (std::size_t i = st.steps.size(); i-- > 0;)
        svg << " L" << coord(px(st.steps[i])) << " " << coord(py(st.lo[i]));
      svg << " Z\" fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < st.steps.size(); ++i)
      svg << (i ? " " : "") << coord(px(st.steps[i])) << "," << coord(py(st.mean[i]));
    svg << "\"/>\n";
  }

  // legend, top-right inside the plot area
  svg << "<g font-family=\"sans-serif\" font-size=\"13\">\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double ly = kTop + 16 + 20 * static_cast<double>(k);
    const char* color = kPalette[k % kPaletteSize];
    svg << "<line x1=\"" << coord(kLeft + pw - 150) << "\" y1=\"" << coord(ly) << "\" x2=\""
        << coord(kLeft + pw - 122) << "\" y2=\"" << coord(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"3\"/>\n";
    svg << "<text x=\"" << coord(kLeft + pw - 114) << "\" y=\"" << coord(ly + 4) << "\">"
        << series[k].label << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

void write_svg(const std::string& path, const std::string& svg) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open " + path + " for writing");
  os << svg;
  if (!os) throw ValidationError("failed writing " + path);
}

}  // namespace rllab
