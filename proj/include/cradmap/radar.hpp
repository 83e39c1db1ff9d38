#ifndef CRADMAP_RADAR_HPP
#define CRADMAP_RADAR_HPP

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "cradmap/frontend.hpp"
#include "cradmap/radar_scan.hpp"
#include "cradmap/simworld.hpp"

namespace cradmap::radar {

// Fixed rotation taking radar axes (x forward, y left, z up) to camera axes
// (z forward, x right, y down). The sensors share an origin.
SE3Pose camera_from_radar();

// True when more than near_fraction of the valid depth pixels are closer
// than near_threshold. An image without valid pixels never triggers.
bool occlusion_trigger(const sim::DepthImage& depth, double near_threshold,
                       double near_fraction);

// Keeps measurements with snr >= s_th, in order.
RadarScan snr_filter(const RadarScan& scan, double s_th);

// r * (cos(theta) cos(phi), sin(theta) cos(phi), sin(phi)) mapped through
// `pose`, one point per measurement in order.
PointCloud to_global(const RadarScan& scan, const SE3Pose& pose);

// Metallic detections in the world frame. Only denoise() creates one.
class RadarMap {
 public:
  const PointCloud& cloud() const { return cloud_; }
  std::size_t size() const { return cloud_.size(); }
  bool empty() const { return cloud_.empty(); }

  // Union of several maps; the parts have already been denoised.
  static RadarMap Merge(std::span<const RadarMap> maps);

 private:
  friend RadarMap denoise(const PointCloud& points, int k_neighbors, double lambda);
  RadarMap() = default;
  PointCloud cloud_;
};

// Statistical outlier removal, identical to the dense-cloud filter.
RadarMap denoise(const PointCloud& points, int k_neighbors, double lambda);

struct BtvConfig {
  double near_threshold = 1.5;  // meters
  double near_fraction = 0.5;
  double snr_threshold = 15.0;  // dB
  int outlier_k = 20;
  double outlier_lambda = 2.0;
  SE3Pose mount = camera_from_radar();
};

// SNR filter, world transform through camera_pose * mount, and denoising,
// without the occlusion gate.
RadarMap process_scan(const RadarScan& scan, const SE3Pose& camera_pose,
                      const BtvConfig& config);

// Full pipeline: nothing unless the depth image shows a nearby occluder.
std::optional<RadarMap> run_btv(const sim::DepthImage& depth, const RadarScan& scan,
                                const SE3Pose& camera_pose, const BtvConfig& config);

// Surface samples of a box on a grid of the given spacing, used as a
// detection target.
std::vector<Point3> sample_box_surface(const sim::Box& box, double spacing);

// Percentage of targets with at least min_hits map points within
// match_radius of one of their surface samples. Throws kUndefinedMetric for
// an empty target list.
double detection_rate(const RadarMap& map, std::span<const std::vector<Point3>> targets,
                      double match_radius, int min_hits = 3);

// CSV with header `timestamp,r,theta,phi,d,snr`, one measurement per row.
RadarScan load_radar_csv(const std::filesystem::path& path);
void save_radar_csv(const RadarScan& scan, const std::filesystem::path& path);

}  // namespace cradmap::radar

#endif  // CRADMAP_RADAR_HPP
