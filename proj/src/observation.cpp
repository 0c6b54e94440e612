#include "taildep/observation.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <utility>

namespace taildep {

namespace csv {

std::string escape(const std::string& field) {
  const bool needs = field.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::string join_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out += ',';
    out += escape(fields[i]);
  }
  return out;
}

std::vector<std::vector<std::string>> parse(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;  // distinguishes a trailing empty field

  const std::size_t n = text.size();
  std::size_t i = 0;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  while (i < n) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field += '"';
          i += 2;
          continue;
        }
        quoted = false;
        ++i;
        continue;
      }
      field += ch;
      ++i;
      continue;
    }
    switch (ch) {
      case '"':
        if (!field.empty())
          throw IoError("CSV quote opened in the middle of a field");
        quoted = true;
        field_started = true;
        ++i;
        break;
      case ',':
        end_field();
        field_started = true;  // the next field exists even if empty
        ++i;
        break;
      case '\r':
        if (i + 1 < n && text[i + 1] == '\n') ++i;
        [[fallthrough]];
      case '\n':
        if (row.empty() && field.empty() && !field_started) {
          ++i;  // blank line
          break;
        }
        end_row();
        ++i;
        break;
      default:
        field += ch;
        field_started = true;
        ++i;
        break;
    }
  }
  if (quoted) throw IoError("CSV ends inside a quoted field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

}  // namespace csv

namespace {

double parse_real(const std::string& s, std::size_t line, const char* what) {
  if (s.empty())
    throw IoError("line " + std::to_string(line) + ": empty " + what + " field");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
    throw IoError("line " + std::to_string(line) + ": cannot parse " + what +
                  " value '" + s + "'");
  return v;
}

long long parse_time(const std::string& s, std::size_t line) {
  if (s.empty())
    throw IoError("line " + std::to_string(line) + ": empty t field");
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE)
    throw IoError("line " + std::to_string(line) + ": t must be an integer, got '" +
                  s + "'");
  return v;
}

}  // namespace

ObservationTable observations_from_csv(const std::string& text) {
  const std::vector<std::vector<std::string>> rows = csv::parse(text);
  if (rows.empty()) throw IoError("observation CSV is empty");
  const std::vector<std::string> expect = {"station", "x", "y", "t", "value"};
  if (rows[0] != expect)
    throw IoError("observation CSV must start with the header station,x,y,t,value");

  struct Cell {
    std::size_t station;
    long long t;
    bool operator<(const Cell& o) const {
      return station != o.station ? station < o.station : t < o.t;
    }
  };

  ObservationTable tab;
  std::map<std::string, std::size_t> station_index;
  std::map<Cell, double> cells;
  std::vector<long long> times;

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::vector<std::string>& row = rows[r];
    const std::size_t line = r + 1;
    if (row.size() != 5)
      throw IoError("line " + std::to_string(line) + ": expected 5 fields, got " +
                    std::to_string(row.size()));
    const std::string& name = row[0];
    if (name.empty())
      throw IoError("line " + std::to_string(line) + ": empty station id");
    const double x = parse_real(row[1], line, "x");
    const double y = parse_real(row[2], line, "y");
    const long long t = parse_time(row[3], line);

    std::size_t s;
    const auto it = station_index.find(name);
    if (it == station_index.end()) {
      s = tab.stations.size();
      station_index.emplace(name, s);
      tab.stations.push_back(name);
      tab.xs.push_back(x);
      tab.ys.push_back(y);
    } else {
      s = it->second;
      if (tab.xs[s] != x || tab.ys[s] != y)
        throw IoError("line " + std::to_string(line) + ": station '" + name +
                      "' moved; it was at (" + std::to_string(tab.xs[s]) + ", " +
                      std::to_string(tab.ys[s]) + ")");
    }

    // an empty value field is an explicitly missing cell
    double v = std::numeric_limits<double>::quiet_NaN();
    if (!row[4].empty()) v = parse_real(row[4], line, "value");

    if (!cells.emplace(Cell{s, t}, v).second)
      throw IoError("line " + std::to_string(line) + ": duplicate record for station '" +
                    name + "' at t=" + std::to_string(t));
    times.push_back(t);
  }
  if (tab.stations.empty()) throw IoError("observation CSV has no data rows");

  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  tab.times = times;

  std::map<long long, std::size_t> time_row;
  for (std::size_t k = 0; k < times.size(); ++k) time_row.emplace(times[k], k);

  tab.values = Matrix(times.size(), tab.stations.size(),
                      std::numeric_limits<double>::quiet_NaN());
  for (const auto& [cell, v] : cells)
    tab.values(time_row.at(cell.t), cell.station) = v;

  std::size_t present = 0;
  for (const auto& [cell, v] : cells)
    if (!std::isnan(v)) ++present;
  tab.missing = times.size() * tab.stations.size() - present;
  return tab;
}

ObservationTable read_observations(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return observations_from_csv(text);
}

SiteSet ObservationTable::unit_square_sites() const {
  const std::size_t d = stations.size();
  if (d < 2) throw ConfigError("need at least 2 stations to build a site design");
  const auto [xmin_it, xmax_it] = std::minmax_element(xs.begin(), xs.end());
  const auto [ymin_it, ymax_it] = std::minmax_element(ys.begin(), ys.end());
  const double xspan = *xmax_it - *xmin_it;
  const double yspan = *ymax_it - *ymin_it;
  std::vector<Site> pts(d);
  for (std::size_t s = 0; s < d; ++s) {
    pts[s].x = xspan > 0.0 ? (xs[s] - *xmin_it) / xspan : 0.5;
    pts[s].y = yspan > 0.0 ? (ys[s] - *ymin_it) / yspan : 0.5;
  }
  return SiteSet(std::move(pts));
}

}  // namespace taildep
