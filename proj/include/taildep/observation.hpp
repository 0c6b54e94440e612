#pragma once

#include <string>
#include <vector>

#include "taildep/sites.hpp"
#include "taildep/types.hpp"

namespace taildep {

// Long-format station records aligned onto a (time x station) value grid.
// Stations keep their first-appearance order; rows are the sorted distinct
// time indices; cells nobody reported are NaN and counted in `missing`.
struct ObservationTable {
  std::vector<std::string> stations;
  std::vector<double> xs, ys;       // raw coordinates, one per station
  std::vector<long long> times;
  Matrix values;                    // times.size() rows, stations.size() columns
  std::size_t missing = 0;

  // Coordinates min-max rescaled onto the unit square (a degenerate axis
  // collapses to 0.5). Fails if two stations share a rescaled point.
  SiteSet unit_square_sites() const;
};

// Input schema: header `station,x,y,t,value`; station is free text, x/y real,
// t an integer index, value real or empty for a missing cell.
ObservationTable observations_from_csv(const std::string& text);
ObservationTable read_observations(const std::string& path);

namespace csv {

// RFC 4180 field quoting: wraps anything containing commas, quotes, or line
// breaks and doubles the quotes inside.
std::string escape(const std::string& field);
std::string join_row(const std::vector<std::string>& fields);

std::vector<std::vector<std::string>> parse(const std::string& text);

}  // namespace csv

}  // namespace taildep
