#ifndef CRADMAP_RADAR_SCAN_HPP
#define CRADMAP_RADAR_SCAN_HPP

#include <vector>

namespace cradmap {

struct RadarMeasurement {
  double range = 0.0;      // meters, > 0
  double azimuth = 0.0;    // radians, (-pi, pi]
  double elevation = 0.0;  // radians, |phi| <= pi/2
  double doppler = 0.0;    // m/s, carried but never simulated
  double snr = 0.0;        // dB

  bool operator==(const RadarMeasurement&) const = default;
};

struct RadarScan {
  double timestamp = 0.0;
  // Keyframe whose refined pose localizes this scan; -1 when unassigned.
  int robot_id = -1;
  int keyframe_id = -1;
  std::vector<RadarMeasurement> measurements;

  // Throws kInvalidArgument when a measurement violates the range or angle
  // invariants.
  void validate() const;
};

}  // namespace cradmap

#endif  // CRADMAP_RADAR_SCAN_HPP
