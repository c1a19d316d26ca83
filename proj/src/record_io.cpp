#include "spectralprior/record_io.hpp"

#include <charconv>
#include <sstream>

#include "spectralprior/config.hpp"
#include "spectralprior/error.hpp"
#include "spectralprior/image.hpp"

namespace spectralprior::io {
namespace {

std::string cell(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_double(v);
}

double read_cell(const std::string& s, std::size_t offset) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw IoError("record csv: bad number '" + s + "'", offset);
  return v;
}

}  // namespace

std::string record_csv(const optimize::RunRecord& record, bool timing) {
  std::ostringstream os;
  const std::size_t B = record.entries.empty() ? record.band_edges.size() : record.entries.front().band_residuals.size();
  os << "iter,loss,psnr,clean_error";
  for (std::size_t b = 0; b < B; ++b) os << ",band_" << b;
  if (timing) os << ",ms";
  os << '\n';
  for (const auto& e : record.entries) {
    os << e.iteration << ',' << cell(e.loss) << ',' << cell(e.psnr) << ',' << cell(e.clean_error);
    for (double r : e.band_residuals) os << ',' << cell(r);
    if (timing) os << ',' << cell(e.ms);
    os << '\n';
  }
  return os.str();
}

optimize::RunRecord parse_record_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t offset = 0;
  if (!std::getline(in, line) || !line.starts_with("iter,loss,psnr,clean_error")) {
    throw IoError("record csv: missing header", 0);
  }
  std::size_t bands = 0;
  bool timing = false;
  {
    std::stringstream hs(line);
    std::string col;
    std::size_t i = 0;
    while (std::getline(hs, col, ',')) {
      if (i++ < 4) continue;
      if (col == "ms") {
        timing = true;
      } else if (col == "band_" + std::to_string(bands)) {
        ++bands;
      } else {
        throw IoError("record csv: unexpected column '" + col + "'", 0);
      }
    }
  }
  offset += line.size() + 1;
  optimize::RunRecord record;
  const std::size_t expected = 4 + bands + (timing ? 1 : 0);
  while (std::getline(in, line)) {
    if (line.empty()) {
      offset += 1;
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string col;
    while (std::getline(ls, col, ',')) cols.push_back(col);
    if (cols.size() != expected) {
      throw IoError("record csv: expected " + std::to_string(expected) + " columns, got " + std::to_string(cols.size()), offset);
    }
    optimize::LogEntry e;
    e.iteration = static_cast<std::size_t>(read_cell(cols[0], offset));
    e.loss = read_cell(cols[1], offset);
    e.psnr = read_cell(cols[2], offset);
    e.clean_error = read_cell(cols[3], offset);
    for (std::size_t b = 0; b < bands; ++b) e.band_residuals.push_back(read_cell(cols[4 + b], offset));
    if (timing) e.ms = read_cell(cols.back(), offset);
    record.entries.push_back(std::move(e));
    offset += line.size() + 1;
  }
  return record;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

}  // namespace spectralprior::io
