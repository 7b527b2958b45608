#include "crowdship/geo.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "crowdship/rng.hpp"

namespace crowdship {

LocationSet generate_locations(int count, double radius_km, std::uint64_t seed) {
  if (count < 2) throw std::invalid_argument("need at least the store and one location");
  if (radius_km <= 0.0) throw std::invalid_argument("radius_km must be positive");
  LocationSet locs;
  locs.kind = LocationSet::CoordKind::PlanarKm;
  locs.xs.reserve(count);
  locs.ys.reserve(count);
  locs.xs.push_back(0.0);  // store at the origin
  locs.ys.push_back(0.0);
  RandomStream rng(seed);
  for (int i = 1; i < count; ++i) {
    // Uniform over the disc: sqrt-radius trick.
    double r = radius_km * std::sqrt(rng.uniform());
    double theta = 2.0 * M_PI * rng.uniform();
    locs.xs.push_back(r * std::cos(theta));
    locs.ys.push_back(r * std::sin(theta));
  }
  return locs;
}

static std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    // trim spaces
    std::size_t a = field.find_first_not_of(" \t\r");
    std::size_t b = field.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? "" : field.substr(a, b - a + 1));
  }
  return out;
}

LocationSet load_locations_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open locations file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty locations file: " + path);
  auto header = split_csv_line(line);
  LocationSet locs;
  if (header.size() == 3 && header[1] == "x_km" && header[2] == "y_km") {
    locs.kind = LocationSet::CoordKind::PlanarKm;
  } else if (header.size() == 3 && header[1] == "lat" && header[2] == "lon") {
    locs.kind = LocationSet::CoordKind::LatLon;
  } else {
    throw std::runtime_error(
        "locations header must be id,x_km,y_km or id,lat,lon: " + path);
  }
  int expected = 0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 3)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 3 fields");
    if (std::stoi(f[0]) != expected)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": ids must be consecutive from 0");
    double a = std::stod(f[1]), b = std::stod(f[2]);
    if (locs.kind == LocationSet::CoordKind::LatLon) {
      locs.ys.push_back(a);  // lat
      locs.xs.push_back(b);  // lon
    } else {
      locs.xs.push_back(a);
      locs.ys.push_back(b);
    }
    ++expected;
  }
  if (locs.size() < 2)
    throw std::runtime_error("locations file needs the store plus at least one point");
  return locs;
}

static double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kEarthRadiusKm = 6371.0088;
  auto rad = [](double d) { return d * M_PI / 180.0; };
  double dlat = rad(lat2 - lat1), dlon = rad(lon2 - lon1);
  double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
             std::cos(rad(lat1)) * std::cos(rad(lat2)) * std::sin(dlon / 2) *
                 std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

double distance_km(const LocationSet& locs, LocationId a, LocationId b) {
  if (a < 0 || b < 0 || a >= locs.size() || b >= locs.size())
    throw std::out_of_range("location id out of range");
  if (locs.kind == LocationSet::CoordKind::LatLon)
    return haversine_km(locs.ys[a], locs.xs[a], locs.ys[b], locs.xs[b]);
  double dx = locs.xs[a] - locs.xs[b];
  double dy = locs.ys[a] - locs.ys[b];
  return std::sqrt(dx * dx + dy * dy);
}

TravelTimeTable build_travel_table(const LocationSet& locs, double speed_kmh) {
  if (speed_kmh <= 0.0) throw std::invalid_argument("speed_kmh must be positive");
  TravelTimeTable t;
  t.n = locs.size();
  t.speed_kmh = speed_kmh;
  t.minutes.assign(static_cast<std::size_t>(t.n) * t.n, 0.0);
  const double min_per_km = 60.0 / speed_kmh;
  for (int i = 0; i < t.n; ++i) {
    for (int j = i + 1; j < t.n; ++j) {
      double m = distance_km(locs, i, j) * min_per_km;
      t.minutes[static_cast<std::size_t>(i) * t.n + j] = m;
      t.minutes[static_cast<std::size_t>(j) * t.n + i] = m;
    }
  }
  return t;
}

void dump_travel_table_csv(const TravelTimeTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write travel table: " + path);
  out << "from,to,minutes\n";
  out.precision(10);
  for (int i = 0; i < table.n; ++i)
    for (int j = 0; j < table.n; ++j)
      out << i << ',' << j << ',' << table(i, j) << '\n';
}

}  // namespace crowdship
