#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace rllab {

// One evaluation checkpoint. Losses are means over the update steps since the
// previous row; rows written before any update report NaN losses.
struct MetricsRow {
  std::uint64_t step = 0;
  double eval_return = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double lambda = 0.0;
  double r_min = 0.0;
  std::size_t be_trajs = 0;
};

inline constexpr const char* kMetricsHeader =
    "step,eval_return,critic_loss,actor_loss,lambda,r_min,be_trajs";

// Streams rows as they arrive so a crashed run still leaves a usable prefix.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void write(const MetricsRow& row);

 private:
  std::ofstream os_;
};

std::vector<MetricsRow> load_metrics(const std::string& path);

// %.17g with NaN spelled "nan" regardless of libc, so runs with identical
// history produce byte-identical files.
std::string format_metric(double v);

}  // namespace rllab
