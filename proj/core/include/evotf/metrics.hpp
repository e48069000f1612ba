#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

// Line-delimited JSON metrics.  Keys keep their insertion order and floats
// are printed shortest-round-trip, so a run with a fixed seed reproduces the
// file byte for byte.
namespace evotf {

using MetricValue = std::variant<bool, std::int64_t, double, std::string>;
using MetricRecord = std::vector<std::pair<std::string, MetricValue>>;

class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);  // throws IoError
  void write(const MetricRecord& record);

 private:
  std::string path_;
  std::ofstream out_;
};

std::string metric_record_json(const MetricRecord& record);

}  // namespace evotf
