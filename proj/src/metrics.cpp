#include "dgrd/metrics.hpp"

#include <filesystem>
#include <sstream>

#include "dgrd/errors.hpp"

namespace dgrd {

namespace {

constexpr const char* kHeaderComment = "# dgrd-metrics v1";
constexpr const char* kColumns = "run_id,phase,step,metric,value,wall_s";

}  // namespace

MetricsWriter::MetricsWriter(const std::string& path, std::string run_id)
    : run_id_(std::move(run_id)), start_(std::chrono::steady_clock::now()) {
  namespace fs = std::filesystem;
  bool fresh = true;
  if (fs::exists(path) && fs::file_size(path) > 0) {
    fresh = false;
    // Drop a partial trailing line left by a crash.
    std::ifstream in(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    if (!content.empty() && content.back() != '\n') {
      const auto last_nl = content.find_last_of('\n');
      const uintmax_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
      fs::resize_file(path, keep);
      if (keep == 0) fresh = true;
    }
  }
  out_.open(path, std::ios::app);
  if (!out_) throw IoError(IoErrorKind::kOpenFailed, "cannot open metrics file " + path);
  if (fresh) out_ << kHeaderComment << "\n" << kColumns << "\n";
}

void MetricsWriter::append(const std::string& phase, int64_t step, const std::string& metric,
                           double value) {
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  std::ostringstream os;
  os.precision(17);
  os << run_id_ << "," << phase << "," << step << "," << metric << "," << value << ",";
  os.precision(3);
  os << std::fixed << wall;
  out_ << os.str() << "\n";
}

void MetricsWriter::flush() { out_.flush(); }

std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrorKind::kOpenFailed, "cannot open metrics file " + path);
  std::vector<MetricsRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("run_id,", 0) == 0) continue;
    std::vector<std::string> cols;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        cols.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    cols.push_back(cur);
    if (cols.size() != 6) continue;  // malformed or partial
    try {
      MetricsRow row;
      row.run_id = cols[0];
      row.phase = cols[1];
      row.step = std::stoll(cols[2]);
      row.metric = cols[3];
      row.value = std::stod(cols[4]);
      row.wall_s = std::stod(cols[5]);
      rows.push_back(std::move(row));
    } catch (const std::exception&) {
      continue;
    }
  }
  return rows;
}

}  // namespace dgrd
