#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "coopnlos/common.hpp"

namespace coopnlos {

inline constexpr double kEarthMu = 3.986004418e14;           // m^3/s^2
inline constexpr double kEarthRotationRate = 7.2921151467e-5;  // rad/s
inline constexpr double kEarthRadius = 6371e3;               // m, spherical Earth

struct AlmanacEntry {
  int id = 0;
  double semi_major_axis = 0.0;  // m
  double inclination = 0.0;      // rad
  double raan = 0.0;             // rad
  double mean_anomaly = 0.0;     // rad, at t = 0
  double arg_perigee = 0.0;      // rad
  double eccentricity = 0.0;
};

using SatelliteAlmanac = std::vector<AlmanacEntry>;

/// Reads `id a_m incl_rad raan_rad M0_rad argp_rad ecc` lines; `#` starts a comment.
SatelliteAlmanac load_almanac(const std::filesystem::path& path);
SatelliteAlmanac parse_almanac(const std::string& text);
std::string format_almanac(const SatelliteAlmanac& almanac);
void validate(const AlmanacEntry& entry);

/// 24-satellite GPS-like Walker constellation (6 planes, 55 deg).
SatelliteAlmanac default_gps_almanac();
/// 27-satellite Galileo-like Walker constellation (3 planes, 56 deg), ids from 101.
SatelliteAlmanac default_galileo_almanac();

/// Earth-fixed position of one satellite at time t (s) by Keplerian propagation
/// followed by Earth rotation.
Vec3 satellite_ecef(const AlmanacEntry& entry, double t);

/// positions[epoch][sat] in ECEF for t = gps_time + epoch * dt.
std::vector<std::vector<Vec3>> propagate_satellites(const SatelliteAlmanac& almanac, double gps_time,
                                                     int epochs, double dt);

/// Local east-north-up frame tangent to the spherical Earth at (lat, lon).
struct LocalFrame {
  double latitude = 0.0;   // rad
  double longitude = 0.0;  // rad

  Vec3 origin_ecef() const;
  Eigen::Matrix3d ecef_to_enu() const;
  Vec3 to_enu(const Vec3& ecef) const;
};

/// Elevation (rad) of a point given in local ENU coordinates as seen from a
/// ground point (x, y, 0).
double elevation(const Vec2& ground, const Vec3& target_enu);

/// Indices of satellites whose elevation at `vehicle` is >= mask.
std::vector<int> visible_satellites(const Vec2& vehicle, const std::vector<Vec3>& sats_enu,
                                    double mask_angle);

}  // namespace coopnlos
