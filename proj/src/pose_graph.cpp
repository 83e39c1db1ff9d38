#include "cradmap/pose_graph.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "cradmap/error.hpp"

namespace cradmap::backend {

namespace {

std::string key_name(const KeyframeKey& key) {
  return "(" + std::to_string(key.robot_id) + ", " + std::to_string(key.keyframe_id) + ")";
}

Matrix6 information(const Matrix6& covariance) {
  return covariance.llt().solve(Matrix6::Identity());
}

// Huber-weighted squared whitened norm and its IRLS weight.
std::pair<double, double> robust(double squared, double delta, bool use_huber) {
  if (!use_huber || squared <= delta * delta) return {squared, 1.0};
  const double e = std::sqrt(squared);
  return {2.0 * delta * e - delta * delta, delta / e};
}

struct Union {
  std::vector<int> parent;
  explicit Union(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void join(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

bool PoseGraphEdge::operator==(const PoseGraphEdge& other) const {
  return from == other.from && to == other.to && measured == other.measured &&
         covariance == other.covariance && kind == other.kind;
}

long long node_id(const KeyframeKey& key) {
  return static_cast<long long>(key.robot_id) * 1000000LL + key.keyframe_id;
}

KeyframeKey key_from_node_id(long long id) {
  return {static_cast<int>(id / 1000000LL), static_cast<int>(id % 1000000LL)};
}

void check_covariance(const Matrix6& covariance) {
  if (!covariance.allFinite() ||
      (covariance - covariance.transpose()).cwiseAbs().maxCoeff() >
          1e-12 * std::max(1.0, covariance.cwiseAbs().maxCoeff())) {
    throw Error(ErrorCode::kNonSpdCovariance, "covariance is not symmetric");
  }
  Eigen::LLT<Matrix6> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kNonSpdCovariance, "covariance is not positive definite");
  }
}

void PoseGraph::add_node(const KeyframeKey& key, const SE3Pose& pose) {
  if (!nodes_.emplace(key, pose).second) {
    throw Error(ErrorCode::kDuplicateKey, "pose graph already has node " + key_name(key));
  }
}

const SE3Pose& PoseGraph::pose(const KeyframeKey& key) const {
  auto it = nodes_.find(key);
  if (it == nodes_.end()) {
    throw Error(ErrorCode::kMissingPose, "no pose graph node " + key_name(key));
  }
  return it->second;
}

void PoseGraph::set_pose(const KeyframeKey& key, const SE3Pose& pose) {
  auto it = nodes_.find(key);
  if (it == nodes_.end()) {
    throw Error(ErrorCode::kMissingPose, "no pose graph node " + key_name(key));
  }
  it->second = pose;
}

void PoseGraph::add_edge(const PoseGraphEdge& edge) {
  if (!has_node(edge.from) || !has_node(edge.to)) {
    throw Error(ErrorCode::kMissingPose, "edge " + key_name(edge.from) + " -> " +
                                             key_name(edge.to) + " references a missing node");
  }
  if (edge.kind == EdgeKind::kOdometry &&
      (edge.from.robot_id != edge.to.robot_id ||
       edge.to.keyframe_id != edge.from.keyframe_id + 1)) {
    throw Error(ErrorCode::kInvalidArgument,
                "odometry edge must join consecutive keyframes of one robot");
  }
  check_covariance(edge.covariance);
  edges_.push_back(edge);
}

void PoseGraph::fix(const KeyframeKey& key) {
  if (!has_node(key)) throw Error(ErrorCode::kMissingPose, "cannot fix missing node " + key_name(key));
  fixed_.insert(key);
}

std::vector<std::vector<KeyframeKey>> PoseGraph::components() const {
  std::map<KeyframeKey, int> index;
  std::vector<KeyframeKey> keys;
  for (const auto& [key, pose] : nodes_) {
    index[key] = static_cast<int>(keys.size());
    keys.push_back(key);
  }
  Union u(static_cast<int>(keys.size()));
  for (const PoseGraphEdge& e : edges_) u.join(index.at(e.from), index.at(e.to));
  std::map<int, std::vector<KeyframeKey>> groups;
  for (int i = 0; i < static_cast<int>(keys.size()); ++i) groups[u.find(i)].push_back(keys[i]);
  std::vector<std::vector<KeyframeKey>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  return out;
}

Twist6 edge_residual(const SE3Pose& from, const SE3Pose& to, const SE3Pose& measured) {
  return log_se3(measured.inverse() * from.inverse() * to);
}

std::pair<Matrix6, Matrix6> edge_jacobians(const SE3Pose& from, const SE3Pose& to,
                                           const SE3Pose& measured) {
  const Twist6 r = edge_residual(from, to, measured);
  const Matrix6 jr_inv = lie::right_jacobian_inverse(r);
  const Matrix6 j_to = jr_inv;
  const Matrix6 j_from = -jr_inv * lie::adjoint(to.inverse() * from);
  return {j_from, j_to};
}

double graph_cost(const PoseGraph& graph, const std::map<KeyframeKey, SE3Pose>& poses,
                  double huber_delta) {
  double cost = 0.0;
  for (const PoseGraphEdge& e : graph.edges()) {
    const Twist6 r = edge_residual(poses.at(e.from), poses.at(e.to), e.measured);
    const double squared = r.dot(information(e.covariance) * r);
    cost += robust(squared, huber_delta, e.kind == EdgeKind::kLoop).first;
  }
  return cost;
}

OptimizeResult optimize_pose_graph(const PoseGraph& graph, const OptimizeOptions& options) {
  if (graph.fixed().empty()) {
    throw Error(ErrorCode::kInvalidArgument, "pose graph has no gauge-fixed node");
  }
  for (const auto& component : graph.components()) {
    bool anchored = false;
    for (const KeyframeKey& key : component) anchored = anchored || graph.is_fixed(key);
    if (!anchored) {
      std::ostringstream msg;
      msg << "component of " << component.size() << " node(s) starting at "
          << key_name(component.front()) << " has no fixed node";
      throw Error(ErrorCode::kDisconnectedGraph, msg.str());
    }
  }
  std::vector<Matrix6> info;
  info.reserve(graph.edges().size());
  for (const PoseGraphEdge& e : graph.edges()) {
    check_covariance(e.covariance);
    info.push_back(information(e.covariance));
  }

  std::map<KeyframeKey, int> block;
  for (const auto& [key, pose] : graph.nodes()) {
    if (!graph.is_fixed(key)) {
      const int next = static_cast<int>(block.size());
      block[key] = next;
    }
  }
  const int dim = 6 * static_cast<int>(block.size());

  OptimizeResult result;
  result.poses = graph.nodes();
  result.initial_cost = graph_cost(graph, result.poses, options.huber_delta);
  result.final_cost = result.initial_cost;
  if (dim == 0 || result.initial_cost == 0.0) return result;

  double damping = -1.0;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter + 1;
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd gradient = Eigen::VectorXd::Zero(dim);
    const auto add_block = [&](int row, int col, const Matrix6& m) {
      for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) triplets.emplace_back(6 * row + a, 6 * col + b, m(a, b));
      }
    };
    for (std::size_t i = 0; i < graph.edges().size(); ++i) {
      const PoseGraphEdge& e = graph.edges()[i];
      const SE3Pose& from = result.poses.at(e.from);
      const SE3Pose& to = result.poses.at(e.to);
      const Twist6 r = edge_residual(from, to, e.measured);
      const auto [j_from, j_to] = edge_jacobians(from, to, e.measured);
      const double weight =
          robust(r.dot(info[i] * r), options.huber_delta, e.kind == EdgeKind::kLoop).second;
      const Matrix6 w_info = weight * info[i];
      const auto it_from = block.find(e.from);
      const auto it_to = block.find(e.to);
      if (it_from != block.end()) {
        add_block(it_from->second, it_from->second, j_from.transpose() * w_info * j_from);
        gradient.segment<6>(6 * it_from->second) += j_from.transpose() * w_info * r;
      }
      if (it_to != block.end()) {
        add_block(it_to->second, it_to->second, j_to.transpose() * w_info * j_to);
        gradient.segment<6>(6 * it_to->second) += j_to.transpose() * w_info * r;
      }
      if (it_from != block.end() && it_to != block.end()) {
        const Matrix6 cross = j_from.transpose() * w_info * j_to;
        add_block(it_from->second, it_to->second, cross);
        add_block(it_to->second, it_from->second, cross.transpose());
      }
    }
    Eigen::SparseMatrix<double> hessian(dim, dim);
    hessian.setFromTriplets(triplets.begin(), triplets.end());
    if (damping < 0.0) {
      double max_diag = 0.0;
      for (int d = 0; d < dim; ++d) max_diag = std::max(max_diag, hessian.coeff(d, d));
      damping = options.initial_damping * std::max(max_diag, 1.0);
    }

    bool accepted = false;
    double step_norm = 0.0;
    while (!accepted && damping < 1e12) {
      Eigen::SparseMatrix<double> damped = hessian;
      for (int d = 0; d < dim; ++d) damped.coeffRef(d, d) += damping;
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(damped);
      if (solver.info() != Eigen::Success) {
        damping *= 10.0;
        continue;
      }
      const Eigen::VectorXd step = solver.solve(-gradient);
      step_norm = step.norm();
      std::map<KeyframeKey, SE3Pose> candidate = result.poses;
      for (const auto& [key, b] : block) {
        candidate[key] = candidate[key] * exp_se3(step.segment<6>(6 * b));
      }
      const double cost = graph_cost(graph, candidate, options.huber_delta);
      if (cost < result.final_cost) {
        result.poses = std::move(candidate);
        result.final_cost = cost;
        damping = std::max(damping / 10.0, 1e-12);
        accepted = true;
      } else {
        damping *= 10.0;
        if (step_norm < options.tolerance) break;
      }
    }
    if (!accepted || step_norm < options.tolerance || result.final_cost == 0.0) break;
  }
  return result;
}

void save_pose_graph(const PoseGraph& graph, std::ostream& out) {
  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), " %.17g", v);
    out << buf;
  };
  const auto write_pose = [&](const SE3Pose& p) {
    const auto& t = p.translation();
    const auto& q = p.rotation();
    for (double v : {t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()}) num(v);
  };
  for (const auto& [key, pose] : graph.nodes()) {
    out << "NODE " << node_id(key);
    write_pose(pose);
    out << '\n';
  }
  for (const PoseGraphEdge& e : graph.edges()) {
    out << (e.kind == EdgeKind::kOdometry ? "EDGE_ODOM " : "EDGE_LOOP ") << node_id(e.from)
        << ' ' << node_id(e.to);
    write_pose(e.measured);
    const Matrix6 inf = information(e.covariance);
    for (int r = 0; r < 6; ++r) {
      for (int c = r; c < 6; ++c) num(inf(r, c));
    }
    out << '\n';
  }
  for (const KeyframeKey& key : graph.fixed()) out << "FIX " << node_id(key) << '\n';
}

PoseGraph load_pose_graph(std::istream& in) {
  PoseGraph graph;
  std::string line;
  int line_no = 0;
  std::vector<std::pair<PoseGraphEdge, int>> edges;
  std::vector<std::pair<KeyframeKey, int>> fixes;
  const auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kParse, "pose graph line " + std::to_string(line_no) + ": " + what);
  };
  const auto read_pose = [&](std::istringstream& s) {
    double v[7];
    for (double& x : v) {
      if (!(s >> x)) fail("expected 7 pose values");
    }
    return SE3Pose(Eigen::Quaterniond(v[6], v[3], v[4], v[5]), Eigen::Vector3d(v[0], v[1], v[2]));
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream s(line);
    std::string tag;
    if (!(s >> tag) || tag[0] == '#') continue;
    if (tag == "NODE") {
      long long id;
      if (!(s >> id)) fail("missing node id");
      graph.add_node(key_from_node_id(id), read_pose(s));
    } else if (tag == "EDGE_ODOM" || tag == "EDGE_LOOP") {
      PoseGraphEdge e;
      long long a, b;
      if (!(s >> a >> b)) fail("missing edge endpoints");
      e.from = key_from_node_id(a);
      e.to = key_from_node_id(b);
      e.kind = tag == "EDGE_ODOM" ? EdgeKind::kOdometry : EdgeKind::kLoop;
      e.measured = read_pose(s);
      Matrix6 inf;
      for (int r = 0; r < 6; ++r) {
        for (int c = r; c < 6; ++c) {
          if (!(s >> inf(r, c))) fail("expected 21 information values");
          inf(c, r) = inf(r, c);
        }
      }
      check_covariance(inf);
      e.covariance = information(inf);
      e.covariance = 0.5 * (e.covariance + e.covariance.transpose()).eval();
      edges.emplace_back(e, line_no);
    } else if (tag == "FIX") {
      long long id;
      if (!(s >> id)) fail("missing node id");
      fixes.emplace_back(key_from_node_id(id), line_no);
    } else {
      fail("unknown record '" + tag + "'");
    }
  }
  for (const auto& [edge, no] : edges) {
    line_no = no;
    try {
      graph.add_edge(edge);
    } catch (const Error& e) {
      fail(e.what());
    }
  }
  for (const auto& [key, no] : fixes) {
    line_no = no;
    if (!graph.has_node(key)) fail("FIX references a missing node");
    graph.fix(key);
  }
  return graph;
}

}  // namespace cradmap::backend
