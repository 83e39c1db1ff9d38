#include "cradmap/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "cradmap/error.hpp"
#include "cradmap/random.hpp"

namespace cradmap::sim {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMaxLandmarksPerFace = 1e6;

// Slab test against an axis-aligned box given by its corners.
bool slab_interval(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
                   const Point3& origin, const Eigen::Vector3d& dir,
                   double& t_enter, double& t_exit) {
  t_enter = -std::numeric_limits<double>::infinity();
  t_exit = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-300) {
      if (origin[a] < lo[a] || origin[a] > hi[a]) return false;
      continue;
    }
    const double inv = 1.0 / dir[a];
    double t0 = (lo[a] - origin[a]) * inv;
    double t1 = (hi[a] - origin[a]) * inv;
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
    if (t_exit < t_enter) return false;
  }
  return true;
}

double truncated_normal(std::mt19937_64& rng, double mean, double sigma,
                        double truncation) {
  if (sigma <= 0.0) return mean;
  std::normal_distribution<double> dist(mean, sigma);
  for (;;) {
    const double x = dist(rng);
    if (truncation <= 0.0 || std::abs(x - mean) <= truncation * sigma) return x;
  }
}

}  // namespace

std::string_view to_string(SurfaceLabel label) {
  switch (label) {
    case SurfaceLabel::kWall: return "wall";
    case SurfaceLabel::kFurniture: return "furniture";
    case SurfaceLabel::kMetallicObject: return "metallic-object";
    case SurfaceLabel::kFloor: return "floor";
  }
  return "wall";
}

SurfaceLabel parse_surface_label(std::string_view text) {
  if (text == "wall") return SurfaceLabel::kWall;
  if (text == "furniture") return SurfaceLabel::kFurniture;
  if (text == "metallic-object") return SurfaceLabel::kMetallicObject;
  if (text == "floor") return SurfaceLabel::kFloor;
  throw Error(ErrorCode::kParse, "unknown surface label '" + std::string(text) + "'");
}

std::optional<std::pair<double, double>> intersect(const Box& box,
                                                   const Point3& origin,
                                                   const Eigen::Vector3d& dir) {
  double t_enter = 0.0;
  double t_exit = 0.0;
  if (!slab_interval(box.min_corner(), box.max_corner(), origin, dir, t_enter,
                     t_exit)) {
    return std::nullopt;
  }
  return std::make_pair(t_enter, t_exit);
}

Scene::Scene(std::string name, std::vector<Box> boxes, double landmark_density,
             std::uint64_t landmark_seed)
    : name_(std::move(name)), boxes_(std::move(boxes)) {
  for (const Box& box : boxes_) {
    if (!(box.extents.array() > 0.0).all() || !box.extents.allFinite()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "box '" + box.name + "' must have strictly positive extents");
    }
    if (box.pose.angle() > 1e-12) {
      throw Error(ErrorCode::kInvalidArgument,
                  "box '" + box.name + "' is not axis-aligned");
    }
    if (!box.pose.translation().allFinite()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "box '" + box.name + "' has a non-finite center");
    }
  }
  if (landmark_density < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "landmark density must be nonnegative");
  }
  if (landmark_density == 0.0) return;

  std::mt19937_64 rng(landmark_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int next_id = 0;
  for (std::size_t b = 0; b < boxes_.size(); ++b) {
    const Box& box = boxes_[b];
    const Eigen::Vector3d lo = box.min_corner();
    const Eigen::Vector3d hi = box.max_corner();
    for (int axis = 0; axis < 3; ++axis) {
      const int u_axis = (axis + 1) % 3;
      const int v_axis = (axis + 2) % 3;
      const double area = box.extents[u_axis] * box.extents[v_axis];
      const double expected = area * landmark_density;
      if (expected > kMaxLandmarksPerFace) {
        throw Error(ErrorCode::kInvalidArgument,
                    "box '" + box.name + "' would receive too many landmarks");
      }
      for (int side = 0; side < 2; ++side) {
        const int count = static_cast<int>(std::floor(expected + unit(rng)));
        for (int i = 0; i < count; ++i) {
          Point3 p;
          p[axis] = side == 0 ? lo[axis] : hi[axis];
          p[u_axis] = lo[u_axis] + unit(rng) * box.extents[u_axis];
          p[v_axis] = lo[v_axis] + unit(rng) * box.extents[v_axis];
          landmarks_.push_back(Landmark{next_id++, p, static_cast<int>(b)});
        }
      }
    }
  }
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> Scene::bounds() const {
  if (boxes_.empty()) return {Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
  Eigen::Vector3d lo = boxes_.front().min_corner();
  Eigen::Vector3d hi = boxes_.front().max_corner();
  for (const Box& box : boxes_) {
    lo = lo.cwiseMin(box.min_corner());
    hi = hi.cwiseMax(box.max_corner());
  }
  return {lo, hi};
}

std::optional<RayHit> Scene::first_hit(const Point3& origin,
                                       const Eigen::Vector3d& dir,
                                       double t_min) const {
  std::optional<RayHit> best;
  for (std::size_t b = 0; b < boxes_.size(); ++b) {
    double t_enter = 0.0;
    double t_exit = 0.0;
    if (!slab_interval(boxes_[b].min_corner(), boxes_[b].max_corner(), origin,
                       dir, t_enter, t_exit)) {
      continue;
    }
    const double t = t_enter > t_min ? t_enter : t_exit;
    if (t <= t_min) continue;
    if (!best || t < best->t) best = RayHit{t, static_cast<int>(b)};
  }
  return best;
}

std::vector<RayHit> Scene::all_hits(const Point3& origin,
                                    const Eigen::Vector3d& dir,
                                    double t_min) const {
  std::vector<RayHit> hits;
  for (std::size_t b = 0; b < boxes_.size(); ++b) {
    double t_enter = 0.0;
    double t_exit = 0.0;
    if (!slab_interval(boxes_[b].min_corner(), boxes_[b].max_corner(), origin,
                       dir, t_enter, t_exit)) {
      continue;
    }
    const double t = t_enter > t_min ? t_enter : t_exit;
    if (t <= t_min) continue;
    hits.push_back(RayHit{t, static_cast<int>(b)});
  }
  std::sort(hits.begin(), hits.end(), [](const RayHit& a, const RayHit& b) {
    return a.t < b.t || (a.t == b.t && a.box_index < b.box_index);
  });
  return hits;
}

void Trajectory::validate() const {
  for (std::size_t i = 1; i < poses.size(); ++i) {
    if (!(poses[i].timestamp > poses[i - 1].timestamp)) {
      std::ostringstream msg;
      msg << "timestamps must strictly increase (index " << i << ")";
      throw Error(ErrorCode::kInvalidArgument, msg.str());
    }
    if (rotation_distance(poses[i - 1].pose, poses[i].pose) >= 0.5 * kPi) {
      std::ostringstream msg;
      msg << "step " << i << " rotates by pi/2 or more";
      throw Error(ErrorCode::kInvalidArgument, msg.str());
    }
  }
  if (sigma_rot < 0.0 || sigma_trans < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "odometry sigmas must be nonnegative");
  }
}

double depth_along_ray(const Scene& scene, const SE3Pose& camera_pose,
                       const CameraIntrinsics& k, const PixelCoord& pixel,
                       double max_range) {
  const Eigen::Vector3d dir_cam((pixel.x() - k.cx) / k.fx,
                                (pixel.y() - k.cy) / k.fy, 1.0);
  const Eigen::Vector3d dir = camera_pose.rotation() * dir_cam;
  const auto hit = scene.first_hit(camera_pose.translation(), dir);
  // dir_cam has unit z, so the ray parameter is the optical-axis depth.
  if (!hit || hit->t > max_range) return 0.0;
  return hit->t;
}

DepthImage render_depth(const Scene& scene, const SE3Pose& camera_pose,
                        const CameraIntrinsics& k, double max_range) {
  k.validate();
  if (!(max_range > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "max_range must be positive");
  }
  DepthImage image(k.width, k.height);
  if (scene.boxes().empty()) return image;
  for (int row = 0; row < k.height; ++row) {
    for (int col = 0; col < k.width; ++col) {
      image.at(col, row) = depth_along_ray(scene, camera_pose, k,
                                           PixelCoord(col, row), max_range);
    }
  }
  return image;
}

std::vector<FeatureObservation> observe_features(const Scene& scene,
                                                 const SE3Pose& camera_pose,
                                                 const CameraIntrinsics& k,
                                                 double pixel_noise_sigma,
                                                 std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const SE3Pose world_to_camera = camera_pose.inverse();
  const Point3 center = camera_pose.translation();

  std::vector<FeatureObservation> out;
  for (const Landmark& lm : scene.landmarks()) {
    const Point3 pc = world_to_camera * lm.position;
    if (!(pc.z() > 0.0)) continue;
    const PixelCoord pixel = project(world_to_camera, lm.position, k);
    if (!k.contains(pixel)) continue;
    const auto hit = scene.first_hit(center, lm.position - center);
    if (hit && hit->t < 1.0 - 1e-9) continue;  // occluded

    PixelCoord observed = pixel;
    if (pixel_noise_sigma > 0.0) {
      const double du = noise(rng);
      const double dv = noise(rng);
      observed += pixel_noise_sigma * PixelCoord(du, dv);
      if (!k.contains(observed)) continue;
    }
    out.push_back(FeatureObservation{lm.id, observed, pc.z(),
                                     mix_seed(static_cast<std::uint64_t>(lm.id))});
  }
  return out;
}

void apply_depth_noise(DepthImage& image, const DepthNoise& noise,
                       std::uint64_t rng_seed) {
  if (noise.relative_sigma <= 0.0 && noise.outlier_fraction <= 0.0) return;
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double& d : image.depth) {
    if (d <= 0.0) continue;
    const double g = gauss(rng);
    const double u = unit(rng);
    const double r = unit(rng);
    if (u < noise.outlier_fraction) {
      d = std::max(1e-3, r * noise.max_range);
      continue;
    }
    const double noisy = d * (1.0 + noise.relative_sigma * g);
    d = noisy > 0.0 ? std::min(noisy, noise.max_range) : d;
  }
}

void perturb_feature_depths(std::vector<FeatureObservation>& observations,
                            double relative_sigma, std::uint64_t rng_seed) {
  if (relative_sigma <= 0.0) return;
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (FeatureObservation& obs : observations) {
    const double noisy = obs.depth * (1.0 + relative_sigma * gauss(rng));
    if (noisy > 0.0) obs.depth = noisy;
  }
}

RadarScan simulate_radar(const Scene& scene, const SE3Pose& sensor_pose,
                         const RadarSimConfig& config) {
  if (!(config.angular_resolution > 0.0) || !(config.max_range > 0.0) ||
      config.azimuth_fov < 0.0 || config.elevation_fov < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "invalid radar grid configuration");
  }
  RadarScan scan;
  std::mt19937_64 rng(config.rng_seed);
  std::normal_distribution<double> range_noise(0.0, 1.0);

  const int n_az =
      static_cast<int>(std::floor(config.azimuth_fov / config.angular_resolution + 1e-9)) + 1;
  const int n_el =
      static_cast<int>(std::floor(config.elevation_fov / config.angular_resolution + 1e-9)) + 1;
  const Point3 origin = sensor_pose.translation();

  for (int ie = 0; ie < n_el; ++ie) {
    const double phi = (ie - 0.5 * (n_el - 1)) * config.angular_resolution;
    for (int ia = 0; ia < n_az; ++ia) {
      const double theta = (ia - 0.5 * (n_az - 1)) * config.angular_resolution;
      const Eigen::Vector3d dir_sensor(std::cos(theta) * std::cos(phi),
                                       std::sin(theta) * std::cos(phi),
                                       std::sin(phi));
      const Eigen::Vector3d dir = sensor_pose.rotation() * dir_sensor;
      for (const RayHit& hit : scene.all_hits(origin, dir)) {
        if (hit.t > config.max_range) break;
        const bool metallic = scene.boxes()[hit.box_index].metallic;
        double r = hit.t;
        if (config.range_noise_sigma > 0.0) {
          const double noisy = r + config.range_noise_sigma * range_noise(rng);
          if (noisy > 0.0) r = noisy;
        }
        const double snr = truncated_normal(
            rng, metallic ? config.metallic_snr_mean : config.non_metallic_snr_mean,
            config.snr_sigma, config.snr_truncation);
        scan.measurements.push_back(RadarMeasurement{r, theta, phi, 0.0, snr});
        if (metallic) break;
      }
    }
  }
  return scan;
}

std::vector<SE3Pose> noisy_odometry(const Trajectory& trajectory,
                                    std::uint64_t rng_seed) {
  if (trajectory.poses.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "odometry needs a trajectory with at least two poses");
  }
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<SE3Pose> increments;
  increments.reserve(trajectory.poses.size() - 1);
  for (std::size_t i = 0; i + 1 < trajectory.poses.size(); ++i) {
    const SE3Pose delta =
        trajectory.poses[i].pose.inverse() * trajectory.poses[i + 1].pose;
    if (trajectory.sigma_rot == 0.0 && trajectory.sigma_trans == 0.0) {
      increments.push_back(delta);
      continue;
    }
    Twist6 xi;
    for (int j = 0; j < 3; ++j) xi[j] = trajectory.sigma_rot * gauss(rng);
    for (int j = 3; j < 6; ++j) xi[j] = trajectory.sigma_trans * gauss(rng);
    increments.push_back(delta * exp_se3(xi));
  }
  return increments;
}

}  // namespace cradmap::sim
