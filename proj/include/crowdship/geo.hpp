#pragma once
#include <cstdint>
#include <string>
#include <vector>

namespace crowdship {

using LocationId = int;  // 0 is always the store/depot

struct LocationSet {
  enum class CoordKind { PlanarKm, LatLon };
  CoordKind kind = CoordKind::PlanarKm;
  // PlanarKm: xs/ys are km offsets from the store. LatLon: xs=lon, ys=lat.
  std::vector<double> xs, ys;

  int size() const { return static_cast<int>(xs.size()); }
};

// Store at the origin, `count-1` service points uniform on a disc of the given
// radius. Total size is `count` (store included).
LocationSet generate_locations(int count, double radius_km, std::uint64_t seed);

// CSV with header id,x_km,y_km or id,lat,lon; ids must be 0..n-1 with 0 first.
LocationSet load_locations_csv(const std::string& path);

double distance_km(const LocationSet& locs, LocationId a, LocationId b);

// Dense symmetric travel-time matrix in minutes at constant speed.
struct TravelTimeTable {
  int n = 0;
  double speed_kmh = 0.0;
  std::vector<double> minutes;  // n*n row-major

  double operator()(LocationId a, LocationId b) const {
    return minutes[static_cast<std::size_t>(a) * n + b];
  }
};

TravelTimeTable build_travel_table(const LocationSet& locs, double speed_kmh);

void dump_travel_table_csv(const TravelTimeTable& table, const std::string& path);

}  // namespace crowdship
