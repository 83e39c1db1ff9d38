#ifndef CRADMAP_POSE_GRAPH_HPP
#define CRADMAP_POSE_GRAPH_HPP

#include <iosfwd>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "cradmap/frontend.hpp"
#include "cradmap/geometry.hpp"

namespace cradmap::backend {

enum class EdgeKind { kOdometry, kLoop };

// Relative-pose constraint. The residual is
//   r = log(measured^-1 * pose(from)^-1 * pose(to)).
struct PoseGraphEdge {
  KeyframeKey from;
  KeyframeKey to;
  SE3Pose measured;
  Matrix6 covariance = Matrix6::Identity();
  EdgeKind kind = EdgeKind::kOdometry;

  bool operator==(const PoseGraphEdge& other) const;
};

// Stable integer id used in text dumps: robot_id * 1000000 + keyframe_id.
long long node_id(const KeyframeKey& key);
KeyframeKey key_from_node_id(long long id);

// Throws kNonSpdCovariance unless `covariance` is symmetric and its Cholesky
// factorization succeeds.
void check_covariance(const Matrix6& covariance);

class PoseGraph {
 public:
  void add_node(const KeyframeKey& key, const SE3Pose& pose);
  bool has_node(const KeyframeKey& key) const { return nodes_.count(key) != 0; }
  const SE3Pose& pose(const KeyframeKey& key) const;
  void set_pose(const KeyframeKey& key, const SE3Pose& pose);

  // Odometry edges must join keyframe k to keyframe k + 1 of one robot.
  void add_edge(const PoseGraphEdge& edge);

  void fix(const KeyframeKey& key);
  void clear_fixed() { fixed_.clear(); }
  bool is_fixed(const KeyframeKey& key) const { return fixed_.count(key) != 0; }

  const std::map<KeyframeKey, SE3Pose>& nodes() const { return nodes_; }
  const std::vector<PoseGraphEdge>& edges() const { return edges_; }
  const std::set<KeyframeKey>& fixed() const { return fixed_; }

  // Connected components over all edges, each sorted, ordered by first key.
  std::vector<std::vector<KeyframeKey>> components() const;

 private:
  std::map<KeyframeKey, SE3Pose> nodes_;
  std::vector<PoseGraphEdge> edges_;
  std::set<KeyframeKey> fixed_;
};

Twist6 edge_residual(const SE3Pose& from, const SE3Pose& to, const SE3Pose& measured);

// Derivatives of edge_residual under from <- from * exp(d_from) and
// to <- to * exp(d_to).
std::pair<Matrix6, Matrix6> edge_jacobians(const SE3Pose& from, const SE3Pose& to,
                                           const SE3Pose& measured);

struct OptimizeOptions {
  int max_iterations = 50;
  double tolerance = 1e-10;  // on the norm of the stacked tangent step
  double huber_delta = 1.345;  // whitened units, loop edges only
  double initial_damping = 1e-6;
};

struct OptimizeResult {
  std::map<KeyframeKey, SE3Pose> poses;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
};

// Weighted objective at the given node values (Huber on loop edges).
double graph_cost(const PoseGraph& graph, const std::map<KeyframeKey, SE3Pose>& poses,
                  double huber_delta);

// Levenberg-Marquardt over all non-fixed nodes with a sparse LDLT solve.
// Every connected component needs at least one fixed node; otherwise throws
// kDisconnectedGraph naming the unanchored component.
OptimizeResult optimize_pose_graph(const PoseGraph& graph,
                                   const OptimizeOptions& options = {});

// Line format, one record per line:
//   NODE id tx ty tz qx qy qz qw
//   EDGE_ODOM from to tx ty tz qx qy qz qw i11 i12 .. i16 i22 .. i66
//   EDGE_LOOP (same as EDGE_ODOM)
//   FIX id
// The 21 trailing values are the upper triangle of the information matrix.
void save_pose_graph(const PoseGraph& graph, std::ostream& out);
PoseGraph load_pose_graph(std::istream& in);

}  // namespace cradmap::backend

#endif  // CRADMAP_POSE_GRAPH_HPP
