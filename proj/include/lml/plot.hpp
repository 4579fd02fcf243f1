#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace lml::plot {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

// Renders `metric` from a metrics CSV as a static SVG chart. Rows with an r
// value are drawn as metric-vs-r lines per method; otherwise the mean per
// (scenario, method) is drawn as grouped bars.
std::string render_svg(const CsvTable& table, const std::string& metric);

}  // namespace lml::plot
