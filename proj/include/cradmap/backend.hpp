#ifndef CRADMAP_BACKEND_HPP
#define CRADMAP_BACKEND_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "cradmap/frontend.hpp"
#include "cradmap/pose_graph.hpp"

namespace cradmap::backend {

using CovisibilityIndex = std::map<int, std::set<KeyframeKey>>;

// Global keyframe store for all robots.
class Atlas {
 public:
  // Throws kDuplicateKey when the key is already present.
  void insert(Keyframe keyframe);

  bool contains(const KeyframeKey& key) const { return keyframes_.count(key) != 0; }
  const Keyframe& at(const KeyframeKey& key) const;
  std::size_t size() const { return keyframes_.size(); }

  const std::map<KeyframeKey, Keyframe>& keyframes() const { return keyframes_; }
  // Keyframe ids per robot in insertion order.
  const std::map<int, std::vector<int>>& robot_index() const { return robot_index_; }
  const std::vector<KeyframeKey>& integration_order() const { return order_; }
  const CovisibilityIndex& covisibility() const { return covisibility_; }

  const SE3Pose& refined_pose(const KeyframeKey& key) const;
  void set_refined_pose(const KeyframeKey& key, const SE3Pose& pose);

  void add_loop(const PoseGraphEdge& edge) { loops_.push_back(edge); }
  const std::vector<PoseGraphEdge>& loops() const { return loops_; }

  CovisibilityIndex rebuild_covisibility() const;

 private:
  std::map<KeyframeKey, Keyframe> keyframes_;
  std::map<KeyframeKey, SE3Pose> refined_;
  std::map<int, std::vector<int>> robot_index_;
  std::vector<KeyframeKey> order_;
  CovisibilityIndex covisibility_;
  std::vector<PoseGraphEdge> loops_;
};

void save_atlas(const Atlas& atlas, const std::filesystem::path& path);
Atlas load_atlas(const std::filesystem::path& path);

struct BackendConfig {
  CameraIntrinsics camera;
  Matrix6 odometry_covariance = 1e-4 * Matrix6::Identity();
  Matrix6 loop_covariance = 1e-5 * Matrix6::Identity();
  int min_shared = 15;
  int exclusion_window = 10;
  int optimize_every = 10;         // keyframes between scheduled optimizations
  double max_loop_rms_px = 3.0;    // verification gate
  int max_loop_attempts = 3;       // candidates verified per keyframe
  // Also hold every robot's first keyframe fixed, for robots whose start
  // poses are known in the shared frame.
  bool anchor_every_robot = false;
  OptimizeOptions optimizer;
};

// Nodes at the atlas' refined poses, one odometry edge per consecutive pair
// of a robot's keyframes, the atlas' accepted loop edges, and the earliest
// integrated keyframe of every connected component fixed.
PoseGraph derive_pose_graph(const Atlas& atlas, const Matrix6& odometry_covariance);

// Keyframes sharing at least min_shared landmarks with `key`, skipping the
// same robot's last exclusion_window keyframes before it. Sorted by shared
// count descending, then by key.
std::vector<KeyframeKey> detect_loop_candidates(const Atlas& atlas, const KeyframeKey& key,
                                                int min_shared, int exclusion_window);

struct LoopVerification {
  std::optional<PoseGraphEdge> edge;  // empty when rejected
  int shared = 0;
  double rms_px = 0.0;
};

// Relative pose T_n^-1 * T_j from key_n's pixels against key_j's
// back-projected landmarks. Throws kUnderconstrained below 6 shared
// landmarks; rejects when the RMS reprojection error exceeds max_rms_px.
LoopVerification make_loop_constraint(const Atlas& atlas, const KeyframeKey& key_n,
                                      const KeyframeKey& key_j, const CameraIntrinsics& k,
                                      const Matrix6& loop_covariance, double max_rms_px);

using Broadcast = std::map<int, std::vector<std::pair<int, SE3Pose>>>;

// Single-writer server state: atlas plus pose graph.
class Backend {
 public:
  explicit Backend(BackendConfig config);

  struct Integration {
    std::vector<KeyframeKey> candidates;
    int loops_accepted = 0;
    int loops_rejected = 0;
    bool optimized = false;
  };

  Integration integrate_keyframe(Keyframe keyframe);
  void optimize();
  Broadcast broadcast_poses() const;

  const Atlas& atlas() const { return atlas_; }
  const PoseGraph& graph() const { return graph_; }
  int optimizations() const { return optimizations_; }
  double last_initial_cost() const { return last_initial_cost_; }
  double last_final_cost() const { return last_final_cost_; }

 private:
  BackendConfig config_;
  Atlas atlas_;
  PoseGraph graph_;
  int optimizations_ = 0;
  int since_optimization_ = 0;
  double last_initial_cost_ = 0.0;
  double last_final_cost_ = 0.0;
};

}  // namespace cradmap::backend

#endif  // CRADMAP_BACKEND_HPP
