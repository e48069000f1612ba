#include "evotf/metrics.hpp"

#include "evotf/errors.hpp"
#include "json.hpp"

namespace evotf {

std::string metric_record_json(const MetricRecord& record) {
  nlohmann::ordered_json j;
  for (const auto& [key, value] : record) {
    std::visit([&](const auto& v) { j[key] = v; }, value);
  }
  return j.dump();
}

MetricsWriter::MetricsWriter(const std::string& path)
    : path_(path), out_(path, std::ios::trunc) {
  if (!out_) throw IoError("metrics: cannot open '" + path + "' for writing");
}

void MetricsWriter::write(const MetricRecord& record) {
  out_ << metric_record_json(record) << '\n';
  out_.flush();
  if (!out_) throw IoError("metrics: write failed for '" + path_ + "'");
}

}  // namespace evotf
