#pragma once

#include <filesystem>
#include <string>

#include "spectralprior/optimize.hpp"

namespace spectralprior::io {

/// Run record CSV.
///
/// Columns: iter, loss, psnr, clean_error, band_0 .. band_{B-1}, and ms when
/// timing is requested. Numbers use 17 significant digits; missing values are
/// written as nan. Without timing the file depends only on the computation.
std::string record_csv(const optimize::RunRecord& record, bool timing = false);
optimize::RunRecord parse_record_csv(const std::string& text);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace spectralprior::io
