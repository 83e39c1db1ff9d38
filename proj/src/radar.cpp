#include "cradmap/radar.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "cradmap/error.hpp"
#include "cradmap/kdtree.hpp"

namespace cradmap {

void RadarScan::validate() const {
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    const RadarMeasurement& m = measurements[i];
    const auto bad = [&](const char* what) {
      throw Error(ErrorCode::kInvalidArgument,
                  "radar measurement " + std::to_string(i) + ": " + what);
    };
    if (!(m.range > 0.0) || !std::isfinite(m.range)) bad("range must be positive");
    if (!(std::abs(m.elevation) <= std::numbers::pi / 2)) bad("elevation outside [-pi/2, pi/2]");
    if (!(m.azimuth > -std::numbers::pi && m.azimuth <= std::numbers::pi)) {
      bad("azimuth outside (-pi, pi]");
    }
  }
}

namespace radar {

SE3Pose camera_from_radar() {
  Matrix3 r;
  r << 0, -1, 0,
       0, 0, -1,
       1, 0, 0;
  return SE3Pose::FromRotation(Eigen::Quaterniond(r));
}

bool occlusion_trigger(const sim::DepthImage& depth, double near_threshold,
                       double near_fraction) {
  if (!(near_threshold > 0.0) || !(near_fraction > 0.0 && near_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "trigger threshold and fraction out of range");
  }
  std::size_t valid = 0;
  std::size_t near = 0;
  for (const double d : depth.depth) {
    if (!(d > 0.0) || !std::isfinite(d)) continue;
    ++valid;
    if (d < near_threshold) ++near;
  }
  if (valid == 0) return false;
  return static_cast<double>(near) / static_cast<double>(valid) > near_fraction;
}

RadarScan snr_filter(const RadarScan& scan, double s_th) {
  RadarScan out = scan;
  out.measurements.clear();
  for (const RadarMeasurement& m : scan.measurements) {
    if (m.snr >= s_th) out.measurements.push_back(m);
  }
  return out;
}

PointCloud to_global(const RadarScan& scan, const SE3Pose& pose) {
  PointCloud cloud;
  cloud.points.reserve(scan.measurements.size());
  for (const RadarMeasurement& m : scan.measurements) {
    const double ce = std::cos(m.elevation);
    const Point3 local = m.range * Point3(std::cos(m.azimuth) * ce, std::sin(m.azimuth) * ce,
                                          std::sin(m.elevation));
    cloud.points.push_back(pose * local);
  }
  return cloud;
}

RadarMap RadarMap::Merge(std::span<const RadarMap> maps) {
  RadarMap out;
  for (const RadarMap& m : maps) {
    out.cloud_.points.insert(out.cloud_.points.end(), m.cloud_.points.begin(),
                             m.cloud_.points.end());
  }
  return out;
}

RadarMap denoise(const PointCloud& points, int k_neighbors, double lambda) {
  RadarMap map;
  map.cloud_ = frontend::remove_outliers(points, k_neighbors, lambda);
  map.cloud_.source_pixels.clear();
  return map;
}

RadarMap process_scan(const RadarScan& scan, const SE3Pose& camera_pose,
                      const BtvConfig& config) {
  scan.validate();
  const RadarScan strong = snr_filter(scan, config.snr_threshold);
  return denoise(to_global(strong, camera_pose * config.mount), config.outlier_k,
                 config.outlier_lambda);
}

std::optional<RadarMap> run_btv(const sim::DepthImage& depth, const RadarScan& scan,
                                const SE3Pose& camera_pose, const BtvConfig& config) {
  if (!occlusion_trigger(depth, config.near_threshold, config.near_fraction)) {
    return std::nullopt;
  }
  return process_scan(scan, camera_pose, config);
}

std::vector<Point3> sample_box_surface(const sim::Box& box, double spacing) {
  if (!(spacing > 0.0)) throw Error(ErrorCode::kInvalidArgument, "spacing must be positive");
  const Point3 lo = box.min_corner();
  const Point3 hi = box.max_corner();
  std::vector<Point3> out;
  for (int a = 0; a < 3; ++a) {
    const int b = (a + 1) % 3;
    const int c = (a + 2) % 3;
    const int nb = std::max(1, static_cast<int>(std::ceil((hi[b] - lo[b]) / spacing)));
    const int nc = std::max(1, static_cast<int>(std::ceil((hi[c] - lo[c]) / spacing)));
    for (const double face : {lo[a], hi[a]}) {
      for (int i = 0; i <= nb; ++i) {
        for (int j = 0; j <= nc; ++j) {
          Point3 p;
          p[a] = face;
          p[b] = lo[b] + (hi[b] - lo[b]) * i / nb;
          p[c] = lo[c] + (hi[c] - lo[c]) * j / nc;
          out.push_back(p);
        }
      }
    }
  }
  return out;
}

double detection_rate(const RadarMap& map, std::span<const std::vector<Point3>> targets,
                      double match_radius, int min_hits) {
  if (targets.empty()) throw Error(ErrorCode::kUndefinedMetric, "no detection targets");
  if (!(match_radius > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "match radius must be positive");
  }
  int detected = 0;
  for (const std::vector<Point3>& surface : targets) {
    if (surface.empty() || map.empty()) continue;
    const KdTree tree(surface);
    int hits = 0;
    for (const Point3& p : map.cloud().points) {
      const std::vector<int> nn = tree.nearest(p, 1);
      if ((surface[nn.front()] - p).norm() <= match_radius) ++hits;
    }
    if (hits >= min_hits) ++detected;
  }
  return 100.0 * detected / static_cast<double>(targets.size());
}

RadarScan load_radar_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open radar scan " + path.string());
  RadarScan scan;
  std::string line;
  int line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("timestamp", 0) == 0) continue;
    for (char& ch : line) {
      if (ch == ',') ch = ' ';
    }
    std::istringstream s(line);
    double t;
    RadarMeasurement m;
    std::string extra;
    if (!(s >> t >> m.range >> m.azimuth >> m.elevation >> m.doppler >> m.snr) || (s >> extra)) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(line_no) +
                                         ": expected 6 numeric fields");
    }
    if (first) scan.timestamp = t;
    first = false;
    scan.measurements.push_back(m);
  }
  scan.validate();
  return scan;
}

void save_radar_csv(const RadarScan& scan, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write radar scan " + path.string());
  out << "timestamp,r,theta,phi,d,snr\n";
  char line[200];
  for (const RadarMeasurement& m : scan.measurements) {
    std::snprintf(line, sizeof(line), "%.9f,%.9f,%.9f,%.9f,%.9f,%.6f\n", scan.timestamp,
                  m.range, m.azimuth, m.elevation, m.doppler, m.snr);
    out << line;
  }
}

}  // namespace radar

}  // namespace cradmap
