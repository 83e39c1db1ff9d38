#ifndef CRADMAP_SIMWORLD_HPP
#define CRADMAP_SIMWORLD_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cradmap/geometry.hpp"
#include "cradmap/radar_scan.hpp"

namespace cradmap::sim {

enum class SurfaceLabel { kWall, kFurniture, kMetallicObject, kFloor };

std::string_view to_string(SurfaceLabel label);
SurfaceLabel parse_surface_label(std::string_view text);

// Axis-aligned box. `pose` places the box center; its rotation must be the
// identity.
struct Box {
  std::string name;
  SE3Pose pose;
  Eigen::Vector3d extents = Eigen::Vector3d::Ones();  // full side lengths
  SurfaceLabel label = SurfaceLabel::kWall;
  bool metallic = false;

  Eigen::Vector3d min_corner() const { return pose.translation() - 0.5 * extents; }
  Eigen::Vector3d max_corner() const { return pose.translation() + 0.5 * extents; }
};

// Parametric ray/box intersection interval [enter, exit].
std::optional<std::pair<double, double>> intersect(const Box& box,
                                                   const Point3& origin,
                                                   const Eigen::Vector3d& dir);

struct Landmark {
  int id = 0;
  Point3 position;
  int box_index = 0;
};

struct RayHit {
  double t = 0.0;
  int box_index = -1;
};

// Immutable ground-truth world: boxes plus a landmark set sampled on the box
// surfaces at a fixed seed.
class Scene {
 public:
  Scene() = default;
  Scene(std::string name, std::vector<Box> boxes, double landmark_density = 0.0,
        std::uint64_t landmark_seed = 0);

  const std::string& name() const { return name_; }
  const std::vector<Box>& boxes() const { return boxes_; }
  const std::vector<Landmark>& landmarks() const { return landmarks_; }

  // Bounding box of all boxes; zero-size at the origin for an empty scene.
  std::pair<Eigen::Vector3d, Eigen::Vector3d> bounds() const;

  // Nearest surface crossing with t > t_min. Rays that start inside a box
  // report that box's exit point.
  std::optional<RayHit> first_hit(const Point3& origin, const Eigen::Vector3d& dir,
                                  double t_min = 1e-9) const;

  // One crossing per box the ray meets (entry, or exit when starting inside),
  // sorted by t.
  std::vector<RayHit> all_hits(const Point3& origin, const Eigen::Vector3d& dir,
                               double t_min = 1e-9) const;

 private:
  std::string name_;
  std::vector<Box> boxes_;
  std::vector<Landmark> landmarks_;
};

Scene load_scene(const std::filesystem::path& path);
void save_scene(const Scene& scene, double landmark_density,
                std::uint64_t landmark_seed, const std::filesystem::path& path);

struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> depth;  // row-major, meters, 0 = no return

  DepthImage() = default;
  DepthImage(int w, int h, double fill = 0.0)
      : width(w), height(h), depth(static_cast<std::size_t>(w) * h, fill) {}

  double at(int col, int row) const {
    return depth[static_cast<std::size_t>(row) * width + col];
  }
  double& at(int col, int row) {
    return depth[static_cast<std::size_t>(row) * width + col];
  }
};

struct FeatureObservation {
  int landmark_id = 0;
  PixelCoord pixel = PixelCoord::Zero();
  double depth = 0.0;
  std::uint64_t descriptor_seed = 0;

  bool operator==(const FeatureObservation&) const = default;
};

struct TimedPose {
  double timestamp = 0.0;
  SE3Pose pose;
};

struct Trajectory {
  std::vector<TimedPose> poses;
  double sigma_rot = 0.0;    // radians per step
  double sigma_trans = 0.0;  // meters per step

  // Throws kInvalidArgument unless timestamps strictly increase and every
  // step rotates by less than pi/2.
  void validate() const;
};

// Depth of the first surface along the ray through `pixel`, measured along
// the optical axis; 0 when nothing lies within max_range.
double depth_along_ray(const Scene& scene, const SE3Pose& camera_pose,
                       const CameraIntrinsics& k, const PixelCoord& pixel,
                       double max_range);

// `camera_pose` maps camera coordinates into the world frame.
DepthImage render_depth(const Scene& scene, const SE3Pose& camera_pose,
                        const CameraIntrinsics& k, double max_range);

// Visible, unoccluded landmarks sorted by id. Pixels carry Gaussian noise;
// depths are exact.
std::vector<FeatureObservation> observe_features(const Scene& scene,
                                                 const SE3Pose& camera_pose,
                                                 const CameraIntrinsics& k,
                                                 double pixel_noise_sigma,
                                                 std::uint64_t rng_seed);

// RGB-D sensor imperfections layered on top of the exact renders.
struct DepthNoise {
  double relative_sigma = 0.0;    // sigma = relative_sigma * depth
  double outlier_fraction = 0.0;  // valid pixels replaced by a random depth
  double max_range = 8.0;
};

void apply_depth_noise(DepthImage& image, const DepthNoise& noise,
                       std::uint64_t rng_seed);
void perturb_feature_depths(std::vector<FeatureObservation>& observations,
                            double relative_sigma, std::uint64_t rng_seed);

struct RadarSimConfig {
  double azimuth_fov = 1.0471975511965976;     // 60 degrees
  double elevation_fov = 0.52359877559829882;  // 30 degrees
  double angular_resolution = 0.024434609527920613;  // 1.4 degrees
  double max_range = 10.0;
  double metallic_snr_mean = 25.0;
  double non_metallic_snr_mean = 5.0;
  double snr_sigma = 2.0;
  // Draws are truncated to mean +/- snr_truncation * snr_sigma.
  double snr_truncation = 4.0;
  double range_noise_sigma = 0.0;
  std::uint64_t rng_seed = 0;
};

// Scans the (azimuth, elevation) grid around the sensor x axis. Non-metallic
// surfaces echo weakly and let the ray continue; the first metallic surface
// echoes strongly and stops it.
RadarScan simulate_radar(const Scene& scene, const SE3Pose& sensor_pose,
                         const RadarSimConfig& config);

// Relative motion between consecutive trajectory poses, each perturbed on
// the right by a tangent-space Gaussian with the trajectory's sigmas.
std::vector<SE3Pose> noisy_odometry(const Trajectory& trajectory,
                                    std::uint64_t rng_seed);

}  // namespace cradmap::sim

#endif  // CRADMAP_SIMWORLD_HPP
