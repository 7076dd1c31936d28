#pragma once

// Report serialization: JSON with 17 significant digits, CSV, SVG rate plots
// and atomic file writes.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "parahom/effective.hpp"
#include "parahom/rates.hpp"

namespace parahom {

using ojson = nlohmann::ordered_json;

const char* version();

// Deterministic JSON text: two-space indent, numbers as %.17g, non-finite
// numbers as null.
std::string dump_json(const ojson& j);

// CSV with a header row; numbers as %.17g.
std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows);

// Writes to a sibling temporary file and renames it over `path`.  Throws
// IoError.
void write_atomic(const std::filesystem::path& path, std::string_view content);

std::string hex64(std::uint64_t v);

ojson to_json(const Matrix& m);
ojson to_json(const LineFit& f);
ojson to_json(const RateReport& r);
ojson to_json(const EffectiveTensor& t);
ojson to_json(const LambdaSweepReport& s);
ojson to_json(const LipschitzProfile& p);
ojson to_json(const ExcessProfile& p);

// Columns param, error, log_param, log_error.
std::string rate_csv(const RateReport& r);

// Log-log scatter of the samples, the fitted line and a guide of the
// predicted slope through the smallest-parameter sample.
std::string rate_svg(const RateReport& r, const std::string& title);

}  // namespace parahom
