#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace dgrd {

// Append-only long-format metrics CSV. Columns are fixed and versioned in the
// header comment; a partial trailing line (crash) is dropped on resume.
class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, std::string run_id);

  void append(const std::string& phase, int64_t step, const std::string& metric, double value);
  void flush();

 private:
  std::ofstream out_;
  std::string run_id_;
  std::chrono::steady_clock::time_point start_;
};

struct MetricsRow {
  std::string run_id;
  std::string phase;
  int64_t step = 0;
  std::string metric;
  double value = 0.0;
  double wall_s = 0.0;
};

// Parses a metrics CSV, skipping comments and any malformed/partial lines.
std::vector<MetricsRow> read_metrics(const std::string& path);

}  // namespace dgrd
