#include "lml/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "lml/errors.hpp"

namespace lml::plot {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string fmt(double v, const char* spec = "%.3g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

constexpr double kW = 640, kH = 400, kLeft = 60, kRight = 150, kTop = 30, kBottom = 50;

struct Frame {
  double lo, hi;
  double y(double v) const { return kTop + (kH - kTop - kBottom) * (1.0 - (v - lo) / (hi - lo)); }
};

Frame frame_for(const std::vector<double>& values) {
  double lo = 0.0, hi = 1.0;
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  return {lo, hi};
}

void axes(std::ostringstream& s, const Frame& f, const std::string& metric) {
  const double x0 = kLeft, x1 = kW - kRight, y0 = kTop, y1 = kH - kBottom;
  s << "<line x1=\"" << x0 << "\" y1=\"" << y1 << "\" x2=\"" << x1 << "\" y2=\"" << y1 << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1 << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = f.lo + (f.hi - f.lo) * i / 4.0;
    s << "<text x=\"" << x0 - 6 << "\" y=\"" << f.y(v) + 4 << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(v)
      << "</text>\n";
  }
  s << "<text x=\"" << kW / 2 << "\" y=\"18\" font-size=\"14\" text-anchor=\"middle\">" << escape(metric)
    << "</text>\n";
}

void legend(std::ostringstream& s, const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kTop + 18.0 * static_cast<double>(i);
    s << "<rect x=\"" << kW - kRight + 12 << "\" y=\"" << y << "\" width=\"10\" height=\"10\" fill=\""
      << kPalette[i % 8] << "\"/>\n";
    s << "<text x=\"" << kW - kRight + 28 << "\" y=\"" << y + 9 << "\" font-size=\"11\">" << escape(names[i])
      << "</text>\n";
  }
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ConfigError("CSV has no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
    } else if (cells == t.header) {
      continue;
    } else {
      if (cells.size() != t.header.size()) {
        throw IoError(path.string() + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(t.header.size()));
      }
      t.rows.push_back(std::move(cells));
    }
  }
  if (t.header.empty()) throw IoError(path.string() + " is empty");
  return t;
}

std::string render_svg(const CsvTable& table, const std::string& metric) {
  const std::size_t mcol = table.column(metric);
  const std::size_t method_col = table.column("method");
  const std::size_t scen_col = table.column("scenario");
  const std::size_t r_col = table.column("r");

  bool by_r = !table.rows.empty();
  for (const auto& row : table.rows)
    if (row[r_col].empty()) by_r = false;

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  if (by_r) {
    std::map<std::string, std::map<double, std::vector<double>>> series;
    std::vector<double> all;
    for (const auto& row : table.rows) {
      if (row[mcol].empty()) continue;
      const double v = std::stod(row[mcol]);
      if (!std::isfinite(v)) continue;
      series[row[method_col]][std::stod(row[r_col])].push_back(v);
      all.push_back(v);
    }
    const Frame f = frame_for(all);
    axes(s, f, metric + " vs r");
    auto xpos = [](double r) { return kLeft + (kW - kLeft - kRight) * std::clamp(r, 0.0, 1.0); };
    for (int i = 0; i <= 10; i += 2) {
      s << "<text x=\"" << xpos(i / 10.0) << "\" y=\"" << kH - kBottom + 16
        << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(i / 10.0) << "</text>\n";
    }
    std::vector<std::string> names;
    std::size_t k = 0;
    for (const auto& [name, pts] : series) {
      std::string path;
      for (const auto& [r, vals] : pts) {
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        path += (path.empty() ? "M" : " L") + fmt(xpos(r), "%.2f") + "," + fmt(f.y(mean), "%.2f");
        s << "<circle cx=\"" << fmt(xpos(r), "%.2f") << "\" cy=\"" << fmt(f.y(mean), "%.2f") << "\" r=\"3\" fill=\""
          << kPalette[k % 8] << "\"/>\n";
      }
      s << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << kPalette[k % 8] << "\" stroke-width=\"2\"/>\n";
      names.push_back(name);
      ++k;
    }
    legend(s, names);
  } else {
    std::vector<std::string> scenarios, methods;
    std::map<std::pair<std::string, std::string>, std::vector<double>> cells;
    std::vector<double> all;
    for (const auto& row : table.rows) {
      if (row[mcol].empty()) continue;
      const double v = std::stod(row[mcol]);
      if (!std::isfinite(v)) continue;
      const auto& sc = row[scen_col];
      const auto& me = row[method_col];
      if (std::find(scenarios.begin(), scenarios.end(), sc) == scenarios.end()) scenarios.push_back(sc);
      if (std::find(methods.begin(), methods.end(), me) == methods.end()) methods.push_back(me);
      cells[{sc, me}].push_back(v);
      all.push_back(v);
    }
    std::vector<double> means;
    for (auto& [key, vals] : cells) {
      double m = 0.0;
      for (double v : vals) m += v;
      means.push_back(m / static_cast<double>(vals.size()));
    }
    const Frame f = frame_for(means);
    axes(s, f, metric);
    const double group_w = (kW - kLeft - kRight) / std::max<double>(1.0, static_cast<double>(scenarios.size()));
    const double bar_w = group_w * 0.8 / std::max<double>(1.0, static_cast<double>(methods.size()));
    for (std::size_t g = 0; g < scenarios.size(); ++g) {
      const double gx = kLeft + group_w * static_cast<double>(g) + group_w * 0.1;
      s << "<text x=\"" << gx + group_w * 0.4 << "\" y=\"" << kH - kBottom + 16
        << "\" font-size=\"11\" text-anchor=\"middle\">" << escape(scenarios[g]) << "</text>\n";
      for (std::size_t m = 0; m < methods.size(); ++m) {
        auto it = cells.find({scenarios[g], methods[m]});
        if (it == cells.end()) continue;
        double mean = 0.0;
        for (double v : it->second) mean += v;
        mean /= static_cast<double>(it->second.size());
        const double top = f.y(mean), base = f.y(std::max(f.lo, 0.0));
        s << "<rect x=\"" << fmt(gx + bar_w * static_cast<double>(m), "%.2f") << "\" y=\""
          << fmt(std::min(top, base), "%.2f") << "\" width=\"" << fmt(bar_w, "%.2f") << "\" height=\""
          << fmt(std::abs(base - top), "%.2f") << "\" fill=\"" << kPalette[m % 8] << "\"/>\n";
      }
    }
    legend(s, methods);
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace lml::plot
