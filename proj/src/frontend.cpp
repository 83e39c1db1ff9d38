#include "cradmap/frontend.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "cradmap/error.hpp"
#include "cradmap/kdtree.hpp"

namespace cradmap {

std::string_view to_string(Codec codec) {
  return codec == Codec::kLosslessRgb ? "lossless-rgb" : "lossless-depth";
}

PayloadDescriptor CodecModel::describe(Codec codec, int width, int height) const {
  const bool rgb = codec == Codec::kLosslessRgb;
  const double ratio = rgb ? rgb_ratio : depth_ratio;
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "compression ratio must lie in (0, 1]");
  }
  PayloadDescriptor out;
  out.codec = codec;
  out.uncompressed_bytes = static_cast<std::uint64_t>(width) * height *
                           (rgb ? rgb_bytes_per_pixel : depth_bytes_per_pixel);
  const double compressed = std::round(static_cast<double>(out.uncompressed_bytes) * ratio);
  out.compressed_bytes = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(compressed));
  out.compressed_bytes = std::min(out.compressed_bytes,
                                  std::max<std::uint64_t>(1, out.uncompressed_bytes));
  return out;
}

namespace frontend {

namespace {

constexpr int kMinObservations = 6;
constexpr double kMaxDamping = 1e12;

struct Correspondence {
  PixelCoord pixel;
  Point3 landmark;
};

double total_cost(std::span<const Correspondence> pairs, const SE3Pose& pose,
                  const CameraIntrinsics& k) {
  const SE3Pose world_to_camera = pose.inverse();
  double cost = 0.0;
  for (const Correspondence& c : pairs) {
    const Point3 pc = world_to_camera * c.landmark;
    if (!(pc.z() > 0.0)) return std::numeric_limits<double>::infinity();
    const PixelCoord proj(k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy);
    cost += (c.pixel - proj).squaredNorm();
  }
  return cost;
}

}  // namespace

void KeyframePolicy::validate() const {
  if (min_translation < 0.0 || min_rotation < 0.0 || min_tracked_fraction < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "keyframe thresholds must be nonnegative");
  }
}

Eigen::Vector2d reprojection_residual(const sim::FeatureObservation& obs,
                                      const Point3& landmark, const SE3Pose& pose,
                                      const CameraIntrinsics& k) {
  return obs.pixel - project(pose.inverse(), landmark, k);
}

Eigen::Matrix<double, 2, 6> reprojection_jacobian(const Point3& landmark,
                                                  const SE3Pose& pose,
                                                  const CameraIntrinsics& k) {
  const Point3 pc = pose.inverse() * landmark;
  Eigen::Matrix<double, 3, 6> d_point;
  d_point.leftCols<3>() = lie::hat(pc);
  d_point.rightCols<3>() = -Matrix3::Identity();
  return -projection_jacobian(pc, k) * d_point;
}

PoseEstimate estimate_pose(std::span<const sim::FeatureObservation> observations,
                           const LandmarkTable& landmarks, const CameraIntrinsics& k,
                           const SE3Pose& init, const PoseEstimateOptions& options) {
  std::vector<Correspondence> known;
  for (const auto& obs : observations) {
    if (auto it = landmarks.find(obs.landmark_id); it != landmarks.end()) {
      known.push_back({obs.pixel, it->second});
    }
  }
  if (known.size() < static_cast<std::size_t>(kMinObservations)) {
    std::ostringstream msg;
    msg << known.size() << " observations with known landmarks, need "
        << kMinObservations;
    throw Error(ErrorCode::kUnderconstrained, msg.str());
  }

  const SE3Pose init_inv = init.inverse();
  std::vector<Correspondence> usable;
  for (const Correspondence& c : known) {
    if ((init_inv * c.landmark).z() > 0.0) usable.push_back(c);
  }
  if (usable.empty()) {
    throw Error(ErrorCode::kDegenerateInit, "all landmarks lie behind the initial pose");
  }
  if (usable.size() < static_cast<std::size_t>(kMinObservations)) {
    std::ostringstream msg;
    msg << "only " << usable.size() << " landmarks in front of the initial pose";
    throw Error(ErrorCode::kUnderconstrained, msg.str());
  }

  PoseEstimate result;
  result.pose = init;
  result.used_observations = static_cast<int>(usable.size());
  result.initial_cost = total_cost(usable, init, k);
  result.cost = result.initial_cost;

  double damping = options.initial_damping;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter + 1;
    if (result.cost == 0.0) break;

    Matrix6 h = Matrix6::Zero();
    Twist6 g = Twist6::Zero();
    const SE3Pose world_to_camera = result.pose.inverse();
    for (const Correspondence& c : usable) {
      const Point3 pc = world_to_camera * c.landmark;
      const PixelCoord proj(k.fx * pc.x() / pc.z() + k.cx,
                            k.fy * pc.y() / pc.z() + k.cy);
      const Eigen::Vector2d r = c.pixel - proj;
      Eigen::Matrix<double, 3, 6> d_point;
      d_point.leftCols<3>() = lie::hat(pc);
      d_point.rightCols<3>() = -Matrix3::Identity();
      const Eigen::Matrix<double, 2, 6> j = -projection_jacobian(pc, k) * d_point;
      h.noalias() += j.transpose() * j;
      g.noalias() += j.transpose() * r;
    }

    bool accepted = false;
    double step_norm = 0.0;
    while (!accepted && damping <= kMaxDamping) {
      const Matrix6 damped = h + damping * Matrix6::Identity();
      const Twist6 delta = damped.ldlt().solve(-g);
      step_norm = delta.norm();
      const SE3Pose candidate = result.pose * exp_se3(delta);
      const double cost = total_cost(usable, candidate, k);
      if (cost < result.cost) {
        result.pose = candidate;
        result.cost = cost;
        damping = std::max(damping / 10.0, 1e-12);
        accepted = true;
      } else {
        damping *= 10.0;
        if (step_norm < options.step_tolerance) break;
      }
    }
    if (!accepted || step_norm < options.step_tolerance) break;
  }
  return result;
}

PointCloud dense_cloud(const sim::DepthImage& depth, const CameraIntrinsics& k,
                       int stride) {
  if (stride < 1) throw Error(ErrorCode::kInvalidArgument, "stride must be >= 1");
  PointCloud cloud;
  for (int row = 0; row < depth.height; row += stride) {
    for (int col = 0; col < depth.width; col += stride) {
      const double d = depth.at(col, row);
      if (!(d > 0.0) || !std::isfinite(d)) continue;
      const PixelCoord pixel(col, row);
      cloud.points.push_back(back_project(pixel, d, k));
      cloud.source_pixels.push_back(pixel);
    }
  }
  return cloud;
}

PointCloud remove_outliers(const PointCloud& cloud, int k_neighbors, double lambda) {
  if (k_neighbors < 1) throw Error(ErrorCode::kInvalidArgument, "k_neighbors must be >= 1");
  if (!(lambda > 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be positive");
  if (cloud.size() < static_cast<std::size_t>(k_neighbors) + 1 || std::isinf(lambda)) {
    return cloud;
  }
  const bool has_pixels = cloud.source_pixels.size() == cloud.points.size();
  const KdTree tree(cloud.points);

  PointCloud out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& x = cloud.points[i];
    const std::vector<int> nn = tree.nearest(x, k_neighbors, static_cast<int>(i));
    Point3 mu = Point3::Zero();
    for (const int j : nn) mu += cloud.points[j];
    mu /= static_cast<double>(nn.size());
    double spread = 0.0;
    for (const int j : nn) spread += (cloud.points[j] - mu).squaredNorm();
    const double sigma = std::sqrt(spread / static_cast<double>(nn.size()));
    if ((x - mu).norm() <= lambda * sigma) {
      out.points.push_back(x);
      if (has_pixels) out.source_pixels.push_back(cloud.source_pixels[i]);
    }
  }
  return out;
}

bool should_create_keyframe(const SE3Pose& prev, const SE3Pose& cur,
                            double tracked_fraction, const KeyframePolicy& policy) {
  if (!(tracked_fraction >= 0.0 && tracked_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tracked fraction must lie in [0, 1]");
  }
  const SE3Pose delta = prev.inverse() * cur;
  return delta.translation().norm() >= policy.min_translation ||
         delta.angle() >= policy.min_rotation ||
         tracked_fraction < policy.min_tracked_fraction;
}

Keyframe package_keyframe(const FrameInputs& inputs, int keyframe_id,
                          const SE3Pose& pose, PointCloud cloud_clean,
                          const CodecModel& codec) {
  Keyframe kf;
  kf.robot_id = inputs.robot_id;
  kf.keyframe_id = keyframe_id;
  kf.timestamp = inputs.timestamp;
  kf.pose = pose;
  kf.observations = inputs.observations;
  kf.rgb_payload = codec.describe(Codec::kLosslessRgb, inputs.image_width,
                                  inputs.image_height);
  kf.depth_payload = codec.describe(Codec::kLosslessDepth, inputs.image_width,
                                    inputs.image_height);
  kf.cloud = std::move(cloud_clean);
  return kf;
}

Frontend::Frontend(int robot_id, FrontendConfig config, const SE3Pose& initial_pose)
    : robot_id_(robot_id),
      config_(std::move(config)),
      initial_pose_(initial_pose),
      pose_(initial_pose),
      last_keyframe_pose_(initial_pose) {
  config_.camera.validate();
  config_.policy.validate();
}

std::optional<Keyframe> Frontend::process(const Frame& frame) {
  const bool first = frame_index_ == 0;
  const SE3Pose predicted = first ? initial_pose_ : pose_ * frame.odometry;

  std::size_t known = 0;
  for (const auto& obs : frame.observations) {
    if (landmarks_.count(obs.landmark_id)) ++known;
  }
  pose_ = predicted;
  if (known >= static_cast<std::size_t>(kMinObservations)) {
    try {
      pose_ = estimate_pose(frame.observations, landmarks_, config_.camera, predicted,
                            config_.pose_options)
                  .pose;
    } catch (const Error&) {
      pose_ = predicted;  // tracking lost; coast on odometry
    }
  }
  const double tracked_fraction =
      frame.observations.empty()
          ? 0.0
          : static_cast<double>(known) / static_cast<double>(frame.observations.size());

  for (const auto& obs : frame.observations) {
    if (!landmarks_.count(obs.landmark_id) && obs.depth > 0.0) {
      landmarks_[obs.landmark_id] = pose_ * back_project(obs.pixel, obs.depth, config_.camera);
    }
    last_seen_[obs.landmark_id] = frame_index_;
  }
  for (auto it = last_seen_.begin(); it != last_seen_.end();) {
    if (frame_index_ - it->second > config_.landmark_window) {
      landmarks_.erase(it->first);
      it = last_seen_.erase(it);
    } else {
      ++it;
    }
  }
  ++frame_index_;

  if (!first && !should_create_keyframe(last_keyframe_pose_, pose_, tracked_fraction,
                                        config_.policy)) {
    return std::nullopt;
  }

  PointCloud cloud;
  if (frame.depth) {
    const sim::DepthImage depth = frame.depth();
    cloud = remove_outliers(dense_cloud(depth, config_.camera, config_.dense_stride),
                            config_.outlier_k, config_.outlier_lambda);
  }
  FrameInputs inputs{robot_id_, frame.timestamp, frame.observations,
                     config_.camera.width, config_.camera.height};
  last_keyframe_pose_ = pose_;
  return package_keyframe(inputs, next_keyframe_id_++, pose_, std::move(cloud),
                          config_.codec);
}

}  // namespace frontend

}  // namespace cradmap
