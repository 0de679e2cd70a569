#include "coopnlos/orbit.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace coopnlos {

void validate(const AlmanacEntry& e) {
  if (!(e.semi_major_axis > 0.0)) throw ConfigError("almanac: semi-major axis must be positive");
  if (!(e.eccentricity >= 0.0 && e.eccentricity < 1.0)) throw ConfigError("almanac: eccentricity must lie in [0, 1)");
  for (double angle : {e.inclination, e.raan, e.mean_anomaly, e.arg_perigee}) {
    if (!(angle >= 0.0 && angle < 2.0 * kPi)) throw ConfigError("almanac: angles must lie in [0, 2pi)");
  }
}

SatelliteAlmanac parse_almanac(const std::string& text) {
  SatelliteAlmanac out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    AlmanacEntry e;
    if (!(fields >> e.id)) continue;  // blank line
    if (!(fields >> e.semi_major_axis >> e.inclination >> e.raan >> e.mean_anomaly >> e.arg_perigee >>
          e.eccentricity)) {
      throw ConfigError("almanac line " + std::to_string(line_no) + ": expected 7 fields");
    }
    std::string extra;
    if (fields >> extra) throw ConfigError("almanac line " + std::to_string(line_no) + ": trailing fields");
    validate(e);
    out.push_back(e);
  }
  return out;
}

SatelliteAlmanac load_almanac(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open almanac file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_almanac(buf.str());
}

std::string format_almanac(const SatelliteAlmanac& almanac) {
  std::ostringstream out;
  out << "# id a_m incl_rad raan_rad M0_rad argp_rad ecc\n" << std::setprecision(17);
  for (const auto& e : almanac) {
    out << e.id << ' ' << e.semi_major_axis << ' ' << e.inclination << ' ' << e.raan << ' ' << e.mean_anomaly
        << ' ' << e.arg_perigee << ' ' << e.eccentricity << '\n';
  }
  return out.str();
}

namespace {

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  return a < 0.0 ? a + 2.0 * kPi : a;
}

SatelliteAlmanac walker(int first_id, int total, int planes, int phasing, double a, double incl) {
  SatelliteAlmanac out;
  const int per_plane = total / planes;
  for (int p = 0; p < planes; ++p) {
    for (int s = 0; s < per_plane; ++s) {
      AlmanacEntry e;
      e.id = first_id + p * per_plane + s;
      e.semi_major_axis = a;
      e.inclination = incl;
      e.raan = wrap_angle(2.0 * kPi * p / planes);
      e.mean_anomaly = wrap_angle(2.0 * kPi * s / per_plane + 2.0 * kPi * phasing * p / total);
      out.push_back(e);
    }
  }
  return out;
}

}  // namespace

SatelliteAlmanac default_gps_almanac() { return walker(1, 24, 6, 0, 26'560e3, 55.0 * kDeg); }

SatelliteAlmanac default_galileo_almanac() { return walker(101, 27, 3, 1, 29'600e3, 56.0 * kDeg); }

Vec3 satellite_ecef(const AlmanacEntry& e, double t) {
  const double n = std::sqrt(kEarthMu / std::pow(e.semi_major_axis, 3));
  const double mean_anomaly = e.mean_anomaly + n * t;
  // Newton iteration on Kepler's equation E - e sin E = M.
  double ecc_anomaly = mean_anomaly;
  for (int i = 0; i < 30 && e.eccentricity > 0.0; ++i) {
    const double f = ecc_anomaly - e.eccentricity * std::sin(ecc_anomaly) - mean_anomaly;
    const double step = f / (1.0 - e.eccentricity * std::cos(ecc_anomaly));
    ecc_anomaly -= step;
    if (std::abs(step) < 1e-15) break;
  }
  const double ecc = e.eccentricity;
  const double x_orb = e.semi_major_axis * (std::cos(ecc_anomaly) - ecc);
  const double y_orb = e.semi_major_axis * std::sqrt(1.0 - ecc * ecc) * std::sin(ecc_anomaly);
  const double r = std::hypot(x_orb, y_orb);
  const double u = e.arg_perigee + std::atan2(y_orb, x_orb);

  const double cu = std::cos(u), su = std::sin(u);
  const double co = std::cos(e.raan), so = std::sin(e.raan);
  const double ci = std::cos(e.inclination), si = std::sin(e.inclination);
  const Vec3 inertial(r * (cu * co - su * ci * so), r * (cu * so + su * ci * co), r * su * si);

  const double theta = kEarthRotationRate * t;
  const double ct = std::cos(theta), st = std::sin(theta);
  return {ct * inertial.x() + st * inertial.y(), -st * inertial.x() + ct * inertial.y(), inertial.z()};
}

std::vector<std::vector<Vec3>> propagate_satellites(const SatelliteAlmanac& almanac, double gps_time, int epochs,
                                                     double dt) {
  if (epochs < 0) throw ConfigError("propagate_satellites: negative epoch count");
  for (const auto& e : almanac) validate(e);
  std::vector<std::vector<Vec3>> out(static_cast<std::size_t>(epochs));
  for (int k = 0; k < epochs; ++k) {
    out[k].reserve(almanac.size());
    for (const auto& e : almanac) out[k].push_back(satellite_ecef(e, gps_time + k * dt));
  }
  return out;
}

Vec3 LocalFrame::origin_ecef() const {
  return kEarthRadius *
         Vec3(std::cos(latitude) * std::cos(longitude), std::cos(latitude) * std::sin(longitude), std::sin(latitude));
}

Eigen::Matrix3d LocalFrame::ecef_to_enu() const {
  const double sl = std::sin(latitude), cl = std::cos(latitude);
  const double so = std::sin(longitude), co = std::cos(longitude);
  Eigen::Matrix3d r;
  r << -so, co, 0.0,
       -sl * co, -sl * so, cl,
       cl * co, cl * so, sl;
  return r;
}

Vec3 LocalFrame::to_enu(const Vec3& ecef) const { return ecef_to_enu() * (ecef - origin_ecef()); }

double elevation(const Vec2& ground, const Vec3& target_enu) {
  const Vec3 d(target_enu.x() - ground.x(), target_enu.y() - ground.y(), target_enu.z());
  return std::atan2(d.z(), d.head<2>().norm());
}

std::vector<int> visible_satellites(const Vec2& vehicle, const std::vector<Vec3>& sats_enu, double mask_angle) {
  if (!(mask_angle >= 0.0 && mask_angle <= kPi / 2)) throw ConfigError("mask angle must lie in [0, pi/2]");
  std::vector<int> out;
  if (mask_angle >= kPi / 2) return out;  // a point exactly at zenith is measure-zero
  for (std::size_t s = 0; s < sats_enu.size(); ++s) {
    if (elevation(vehicle, sats_enu[s]) >= mask_angle) out.push_back(static_cast<int>(s));
  }
  return out;
}

}  // namespace coopnlos
