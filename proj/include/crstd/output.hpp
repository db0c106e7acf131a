#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "crstd/standardize.hpp"

namespace crstd {

// Long format: time,label,cause,estimate,se,lci,uci
void write_series_csv(const StandardizedSeries& series, std::ostream& out);
std::string series_csv(const StandardizedSeries& series);

// Echo of the request plus node counts, versions and extrapolated times.
nlohmann::ordered_json series_manifest(const StandardizeRequest& request,
                                       const StandardizedSeries& series);

nlohmann::ordered_json software_versions();

// Writes text to path, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace crstd
