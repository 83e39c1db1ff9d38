#ifndef CRADMAP_FRONTEND_HPP
#define CRADMAP_FRONTEND_HPP

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cradmap/geometry.hpp"
#include "cradmap/simworld.hpp"

namespace cradmap {

// Point set with optional per-point source pixels (either empty or one per
// point).
struct PointCloud {
  std::vector<Point3> points;
  std::vector<PixelCoord> source_pixels;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct KeyframeKey {
  int robot_id = 0;
  int keyframe_id = 0;

  auto operator<=>(const KeyframeKey&) const = default;
};

struct KeyframeKeyHash {
  std::size_t operator()(const KeyframeKey& key) const noexcept {
    return std::hash<std::int64_t>()((static_cast<std::int64_t>(key.robot_id) << 32) ^
                                     static_cast<std::uint32_t>(key.keyframe_id));
  }
};

enum class Codec { kLosslessRgb, kLosslessDepth };

std::string_view to_string(Codec codec);

struct PayloadDescriptor {
  Codec codec = Codec::kLosslessRgb;
  std::uint64_t uncompressed_bytes = 0;
  std::uint64_t compressed_bytes = 0;

  bool operator==(const PayloadDescriptor&) const = default;
};

// Size model standing in for the PNG / ZSTD image transport codecs.
struct CodecModel {
  double rgb_ratio = 0.5;
  double depth_ratio = 0.35;
  int rgb_bytes_per_pixel = 3;
  int depth_bytes_per_pixel = 2;

  PayloadDescriptor describe(Codec codec, int width, int height) const;
};

struct Keyframe {
  int robot_id = 0;
  int keyframe_id = 0;
  double timestamp = 0.0;
  SE3Pose pose;  // frontend estimate at creation
  std::vector<sim::FeatureObservation> observations;
  PayloadDescriptor rgb_payload;
  PayloadDescriptor depth_payload;
  PointCloud cloud;  // cleaned dense cloud, camera frame

  KeyframeKey key() const { return {robot_id, keyframe_id}; }
  std::uint64_t payload_bits() const {
    return 8 * (rgb_payload.compressed_bytes + depth_payload.compressed_bytes);
  }
};

namespace frontend {

struct KeyframePolicy {
  double min_translation = 0.25;  // meters
  double min_rotation = 0.26;     // radians
  double min_tracked_fraction = 0.5;

  void validate() const;
};

struct PoseEstimateOptions {
  int max_iterations = 100;
  double step_tolerance = 1e-10;
  double initial_damping = 1e-4;
};

struct PoseEstimate {
  SE3Pose pose;  // camera-to-world
  double cost = 0.0;
  double initial_cost = 0.0;
  int iterations = 0;
  int used_observations = 0;
};

using LandmarkTable = std::unordered_map<int, Point3>;

// u - project(pose^-1, landmark).
Eigen::Vector2d reprojection_residual(const sim::FeatureObservation& obs,
                                      const Point3& landmark, const SE3Pose& pose,
                                      const CameraIntrinsics& k);

// Derivative of reprojection_residual under pose <- pose * exp(delta).
Eigen::Matrix<double, 2, 6> reprojection_jacobian(const Point3& landmark,
                                                  const SE3Pose& pose,
                                                  const CameraIntrinsics& k);

// Camera pose minimizing the summed squared reprojection error of the
// observations whose landmarks appear in `landmarks`, by damped Gauss-Newton
// on right-multiplicative tangent increments.
PoseEstimate estimate_pose(std::span<const sim::FeatureObservation> observations,
                           const LandmarkTable& landmarks, const CameraIntrinsics& k,
                           const SE3Pose& init, const PoseEstimateOptions& options = {});

// Back-projects every valid pixel on the stride grid, row-major.
PointCloud dense_cloud(const sim::DepthImage& depth, const CameraIntrinsics& k,
                       int stride);

// Keeps exactly the points x with |x - mu_N(x)| <= lambda * sigma_N(x), where
// N(x) are the k nearest other points, mu_N their centroid and sigma_N their
// RMS distance to it. Decisions are made against the input cloud; order is
// preserved. Clouds with fewer than k + 1 points come back unchanged.
PointCloud remove_outliers(const PointCloud& cloud, int k_neighbors, double lambda);

bool should_create_keyframe(const SE3Pose& prev, const SE3Pose& cur,
                            double tracked_fraction, const KeyframePolicy& policy);

struct FrameInputs {
  int robot_id = 0;
  double timestamp = 0.0;
  std::vector<sim::FeatureObservation> observations;
  int image_width = 0;
  int image_height = 0;
};

Keyframe package_keyframe(const FrameInputs& inputs, int keyframe_id,
                          const SE3Pose& pose, PointCloud cloud_clean,
                          const CodecModel& codec);

struct FrontendConfig {
  CameraIntrinsics camera;
  KeyframePolicy policy;
  int dense_stride = 8;
  int outlier_k = 20;
  double outlier_lambda = 2.0;
  CodecModel codec;
  // Landmarks unseen for more than this many frames leave the local table.
  int landmark_window = 5;
  PoseEstimateOptions pose_options;
};

struct Frame {
  double timestamp = 0.0;
  std::vector<sim::FeatureObservation> observations;
  SE3Pose odometry;  // motion since the previous frame; ignored on the first
  std::function<sim::DepthImage()> depth;  // rendered only for keyframes
};

// Per-robot tracking and dense keyframe generation.
class Frontend {
 public:
  Frontend(int robot_id, FrontendConfig config, const SE3Pose& initial_pose);

  std::optional<Keyframe> process(const Frame& frame);

  int robot_id() const { return robot_id_; }
  const SE3Pose& pose() const { return pose_; }
  const LandmarkTable& landmarks() const { return landmarks_; }
  int next_keyframe_id() const { return next_keyframe_id_; }

 private:
  int robot_id_;
  FrontendConfig config_;
  SE3Pose initial_pose_;
  SE3Pose pose_;
  SE3Pose last_keyframe_pose_;
  LandmarkTable landmarks_;
  std::unordered_map<int, int> last_seen_;
  int frame_index_ = 0;
  int next_keyframe_id_ = 0;
};

}  // namespace frontend

}  // namespace cradmap

#endif  // CRADMAP_FRONTEND_HPP
