#pragma once

#include <string>
#include <vector>

#include "rllab/metrics.hpp"

namespace rllab {

// One curve on the reward plot: a label plus one metrics history per seed.
struct PlotSeries {
  std::string label;
  std::vector<std::vector<MetricsRow>> runs;
};

// Renders eval-return curves as a standalone SVG: per series a mean line and,
// when the series holds several runs, a min-max band across them. Runs inside
// a series must share the same eval-step grid. Throws ValidationError on
// empty input or misaligned grids.
std::string render_reward_svg(const std::vector<PlotSeries>& series, const std::string& title);

void write_svg(const std::string& path, const std::string& svg);

}  // namespace rllab
