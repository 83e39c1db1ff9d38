#include "cradmap/backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "cradmap/error.hpp"

namespace cradmap::backend {

namespace {

using nlohmann::json;

std::string key_name(const KeyframeKey& key) {
  return "(" + std::to_string(key.robot_id) + ", " + std::to_string(key.keyframe_id) + ")";
}

json pose_to_json(const SE3Pose& p) {
  const auto& t = p.translation();
  const auto& q = p.rotation();
  return json::array({t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()});
}

SE3Pose pose_from_json(const json& j) {
  if (!j.is_array() || j.size() != 7) throw Error(ErrorCode::kParse, "pose must have 7 values");
  return SE3Pose(Eigen::Quaterniond(j[6].get<double>(), j[3].get<double>(), j[4].get<double>(),
                                    j[5].get<double>()),
                 Eigen::Vector3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>()));
}

json key_to_json(const KeyframeKey& k) { return json::array({k.robot_id, k.keyframe_id}); }
KeyframeKey key_from_json(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

json payload_to_json(const PayloadDescriptor& p) {
  return {{"codec", std::string(to_string(p.codec))},
          {"uncompressed_bytes", p.uncompressed_bytes},
          {"compressed_bytes", p.compressed_bytes}};
}

PayloadDescriptor payload_from_json(const json& j) {
  PayloadDescriptor p;
  p.codec = j.at("codec").get<std::string>() == "lossless-rgb" ? Codec::kLosslessRgb
                                                               : Codec::kLosslessDepth;
  p.uncompressed_bytes = j.at("uncompressed_bytes").get<std::uint64_t>();
  p.compressed_bytes = j.at("compressed_bytes").get<std::uint64_t>();
  return p;
}

json matrix_to_json(const Matrix6& m) {
  json out = json::array();
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) out.push_back(m(r, c));
  }
  return out;
}

Matrix6 matrix_from_json(const json& j) {
  if (!j.is_array() || j.size() != 36) throw Error(ErrorCode::kParse, "matrix must have 36 values");
  Matrix6 m;
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) m(r, c) = j[r * 6 + c].get<double>();
  }
  return m;
}

}  // namespace

void Atlas::insert(Keyframe keyframe) {
  const KeyframeKey key = keyframe.key();
  if (contains(key)) {
    throw Error(ErrorCode::kDuplicateKey, "atlas already holds keyframe " + key_name(key));
  }
  for (const auto& obs : keyframe.observations) covisibility_[obs.landmark_id].insert(key);
  robot_index_[key.robot_id].push_back(key.keyframe_id);
  order_.push_back(key);
  refined_[key] = keyframe.pose;
  keyframes_.emplace(key, std::move(keyframe));
}

const Keyframe& Atlas::at(const KeyframeKey& key) const {
  auto it = keyframes_.find(key);
  if (it == keyframes_.end()) {
    throw Error(ErrorCode::kMissingPose, "atlas has no keyframe " + key_name(key));
  }
  return it->second;
}

const SE3Pose& Atlas::refined_pose(const KeyframeKey& key) const {
  auto it = refined_.find(key);
  if (it == refined_.end()) {
    throw Error(ErrorCode::kMissingPose, "atlas has no keyframe " + key_name(key));
  }
  return it->second;
}

void Atlas::set_refined_pose(const KeyframeKey& key, const SE3Pose& pose) {
  auto it = refined_.find(key);
  if (it == refined_.end()) {
    throw Error(ErrorCode::kMissingPose, "atlas has no keyframe " + key_name(key));
  }
  it->second = pose;
}

CovisibilityIndex Atlas::rebuild_covisibility() const {
  CovisibilityIndex index;
  for (const auto& [key, kf] : keyframes_) {
    for (const auto& obs : kf.observations) index[obs.landmark_id].insert(key);
  }
  return index;
}

void save_atlas(const Atlas& atlas, const std::filesystem::path& path) {
  json doc;
  doc["keyframes"] = json::array();
  for (const KeyframeKey& key : atlas.integration_order()) {
    const Keyframe& kf = atlas.at(key);
    json obs = json::array();
    for (const auto& o : kf.observations) {
      obs.push_back({o.landmark_id, o.pixel.x(), o.pixel.y(), o.depth, o.descriptor_seed});
    }
    json cloud = json::array();
    for (const Point3& p : kf.cloud.points) {
      cloud.push_back(p.x());
      cloud.push_back(p.y());
      cloud.push_back(p.z());
    }
    json pixels = json::array();
    for (const PixelCoord& px : kf.cloud.source_pixels) {
      pixels.push_back(px.x());
      pixels.push_back(px.y());
    }
    doc["keyframes"].push_back({{"robot_id", kf.robot_id},
                                {"keyframe_id", kf.keyframe_id},
                                {"timestamp", kf.timestamp},
                                {"pose", pose_to_json(kf.pose)},
                                {"refined_pose", pose_to_json(atlas.refined_pose(key))},
                                {"observations", std::move(obs)},
                                {"rgb_payload", payload_to_json(kf.rgb_payload)},
                                {"depth_payload", payload_to_json(kf.depth_payload)},
                                {"cloud", std::move(cloud)},
                                {"cloud_pixels", std::move(pixels)}});
  }
  doc["loops"] = json::array();
  for (const PoseGraphEdge& e : atlas.loops()) {
    doc["loops"].push_back({{"from", key_to_json(e.from)},
                            {"to", key_to_json(e.to)},
                            {"measured", pose_to_json(e.measured)},
                            {"covariance", matrix_to_json(e.covariance)}});
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write atlas " + path.string());
  out << doc.dump() << '\n';
}

Atlas load_atlas(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open atlas " + path.string());
  Atlas atlas;
  try {
    const json doc = json::parse(in);
    for (const json& jk : doc.at("keyframes")) {
      Keyframe kf;
      kf.robot_id = jk.at("robot_id").get<int>();
      kf.keyframe_id = jk.at("keyframe_id").get<int>();
      kf.timestamp = jk.at("timestamp").get<double>();
      kf.pose = pose_from_json(jk.at("pose"));
      for (const json& o : jk.at("observations")) {
        sim::FeatureObservation obs;
        obs.landmark_id = o.at(0).get<int>();
        obs.pixel = PixelCoord(o.at(1).get<double>(), o.at(2).get<double>());
        obs.depth = o.at(3).get<double>();
        obs.descriptor_seed = o.at(4).get<std::uint64_t>();
        kf.observations.push_back(obs);
      }
      kf.rgb_payload = payload_from_json(jk.at("rgb_payload"));
      kf.depth_payload = payload_from_json(jk.at("depth_payload"));
      const json& cloud = jk.at("cloud");
      for (std::size_t i = 0; i + 2 < cloud.size(); i += 3) {
        kf.cloud.points.emplace_back(cloud[i].get<double>(), cloud[i + 1].get<double>(),
                                     cloud[i + 2].get<double>());
      }
      const json& pixels = jk.at("cloud_pixels");
      for (std::size_t i = 0; i + 1 < pixels.size(); i += 2) {
        kf.cloud.source_pixels.emplace_back(pixels[i].get<double>(), pixels[i + 1].get<double>());
      }
      const KeyframeKey key = kf.key();
      const SE3Pose refined = pose_from_json(jk.at("refined_pose"));
      atlas.insert(std::move(kf));
      atlas.set_refined_pose(key, refined);
    }
    for (const json& jl : doc.at("loops")) {
      PoseGraphEdge e;
      e.from = key_from_json(jl.at("from"));
      e.to = key_from_json(jl.at("to"));
      e.measured = pose_from_json(jl.at("measured"));
      e.covariance = matrix_from_json(jl.at("covariance"));
      e.kind = EdgeKind::kLoop;
      atlas.add_loop(e);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return atlas;
}

PoseGraph derive_pose_graph(const Atlas& atlas, const Matrix6& odometry_covariance) {
  PoseGraph graph;
  for (const KeyframeKey& key : atlas.integration_order()) {
    graph.add_node(key, atlas.refined_pose(key));
  }
  for (const auto& [robot, ids] : atlas.robot_index()) {
    for (std::size_t i = 1; i < ids.size(); ++i) {
      const Keyframe& prev = atlas.at({robot, ids[i - 1]});
      const Keyframe& cur = atlas.at({robot, ids[i]});
      graph.add_edge({prev.key(), cur.key(), prev.pose.inverse() * cur.pose,
                      odometry_covariance, EdgeKind::kOdometry});
    }
  }
  for (const PoseGraphEdge& e : atlas.loops()) graph.add_edge(e);

  std::map<KeyframeKey, std::size_t> rank;
  for (std::size_t i = 0; i < atlas.integration_order().size(); ++i) {
    rank[atlas.integration_order()[i]] = i;
  }
  for (const auto& component : graph.components()) {
    const auto earliest = std::min_element(
        component.begin(), component.end(),
        [&](const KeyframeKey& a, const KeyframeKey& b) { return rank.at(a) < rank.at(b); });
    graph.fix(*earliest);
  }
  return graph;
}

std::vector<KeyframeKey> detect_loop_candidates(const Atlas& atlas, const KeyframeKey& key,
                                                int min_shared, int exclusion_window) {
  const Keyframe& kf = atlas.at(key);
  std::map<KeyframeKey, int> shared;
  for (const auto& obs : kf.observations) {
    auto it = atlas.covisibility().find(obs.landmark_id);
    if (it == atlas.covisibility().end()) continue;
    for (const KeyframeKey& other : it->second) ++shared[other];
  }
  std::vector<std::pair<int, KeyframeKey>> ranked;
  for (const auto& [other, count] : shared) {
    if (other == key || count < min_shared) continue;
    if (other.robot_id == key.robot_id && other.keyframe_id < key.keyframe_id &&
        other.keyframe_id >= key.keyframe_id - exclusion_window) {
      continue;
    }
    if (other.robot_id == key.robot_id && other.keyframe_id > key.keyframe_id) continue;
    ranked.emplace_back(count, other);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<KeyframeKey> out;
  out.reserve(ranked.size());
  for (const auto& [count, other] : ranked) out.push_back(other);
  return out;
}

LoopVerification make_loop_constraint(const Atlas& atlas, const KeyframeKey& key_n,
                                      const KeyframeKey& key_j, const CameraIntrinsics& k,
                                      const Matrix6& loop_covariance, double max_rms_px) {
  const Keyframe& kf_n = atlas.at(key_n);
  const Keyframe& kf_j = atlas.at(key_j);
  frontend::LandmarkTable local;
  for (const auto& obs : kf_j.observations) {
    if (obs.depth > 0.0) local[obs.landmark_id] = back_project(obs.pixel, obs.depth, k);
  }
  std::vector<sim::FeatureObservation> matched;
  for (const auto& obs : kf_n.observations) {
    if (local.count(obs.landmark_id)) matched.push_back(obs);
  }
  LoopVerification out;
  out.shared = static_cast<int>(matched.size());
  if (matched.size() < 6) {
    throw Error(ErrorCode::kUnderconstrained,
                "keyframes " + key_name(key_n) + " and " + key_name(key_j) + " share only " +
                    std::to_string(matched.size()) + " landmarks");
  }
  const SE3Pose init = atlas.refined_pose(key_j).inverse() * atlas.refined_pose(key_n);
  frontend::PoseEstimate estimate;
  try {
    estimate = frontend::estimate_pose(matched, local, k, init);
  } catch (const Error&) {
    out.rms_px = std::numeric_limits<double>::infinity();
    return out;
  }
  out.rms_px = std::sqrt(estimate.cost / static_cast<double>(estimate.used_observations));
  if (!(out.rms_px <= max_rms_px)) return out;
  out.edge = PoseGraphEdge{key_n, key_j, estimate.pose.inverse(), loop_covariance,
                           EdgeKind::kLoop};
  return out;
}

Backend::Backend(BackendConfig config) : config_(std::move(config)) {
  check_covariance(config_.odometry_covariance);
  check_covariance(config_.loop_covariance);
  if (config_.optimize_every < 1) {
    throw Error(ErrorCode::kInvalidArgument, "optimize_every must be >= 1");
  }
}

Backend::Integration Backend::integrate_keyframe(Keyframe keyframe) {
  const KeyframeKey key = keyframe.key();
  if (atlas_.contains(key)) {
    throw Error(ErrorCode::kDuplicateKey, "atlas already holds keyframe " + key_name(key));
  }
  const auto& ids = atlas_.robot_index();
  std::optional<KeyframeKey> prev;
  if (auto it = ids.find(key.robot_id); it != ids.end() && !it->second.empty()) {
    prev = KeyframeKey{key.robot_id, it->second.back()};
  }
  const SE3Pose frontend_pose = keyframe.pose;
  atlas_.insert(std::move(keyframe));

  Integration result;
  if (prev) {
    const Keyframe& p = atlas_.at(*prev);
    if (key.keyframe_id != prev->keyframe_id + 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  "keyframe " + key_name(key) + " does not follow " + key_name(*prev));
    }
    const SE3Pose odometry = p.pose.inverse() * frontend_pose;
    // Carry earlier corrections forward so the new node starts consistent
    // with its refined predecessor.
    const SE3Pose start = atlas_.refined_pose(*prev) * odometry;
    atlas_.set_refined_pose(key, start);
    graph_.add_node(key, start);
    graph_.add_edge({*prev, key, odometry, config_.odometry_covariance, EdgeKind::kOdometry});
  } else {
    graph_.add_node(key, frontend_pose);
  }

  result.candidates = detect_loop_candidates(atlas_, key, config_.min_shared,
                                             config_.exclusion_window);
  int attempts = 0;
  for (const KeyframeKey& candidate : result.candidates) {
    if (attempts++ >= config_.max_loop_attempts) break;
    const LoopVerification v = make_loop_constraint(atlas_, key, candidate, config_.camera,
                                                    config_.loop_covariance,
                                                    config_.max_loop_rms_px);
    if (v.edge) {
      graph_.add_edge(*v.edge);
      atlas_.add_loop(*v.edge);
      ++result.loops_accepted;
      break;
    }
    ++result.loops_rejected;
  }

  ++since_optimization_;
  if (result.loops_accepted > 0 || since_optimization_ >= config_.optimize_every) {
    optimize();
    result.optimized = true;
  }
  return result;
}

void Backend::optimize() {
  std::map<KeyframeKey, std::size_t> rank;
  for (std::size_t i = 0; i < atlas_.integration_order().size(); ++i) {
    rank[atlas_.integration_order()[i]] = i;
  }
  graph_.clear_fixed();
  for (const auto& component : graph_.components()) {
    const auto earliest = std::min_element(
        component.begin(), component.end(),
        [&](const KeyframeKey& a, const KeyframeKey& b) { return rank.at(a) < rank.at(b); });
    graph_.fix(*earliest);
  }
  if (config_.anchor_every_robot) {
    for (const auto& [robot, ids] : atlas_.robot_index()) graph_.fix({robot, ids.front()});
  }
  since_optimization_ = 0;
  if (graph_.nodes().empty()) return;
  const OptimizeResult r = optimize_pose_graph(graph_, config_.optimizer);
  for (const auto& [key, pose] : r.poses) {
    graph_.set_pose(key, pose);
    atlas_.set_refined_pose(key, pose);
  }
  last_initial_cost_ = r.initial_cost;
  last_final_cost_ = r.final_cost;
  ++optimizations_;
}

Broadcast Backend::broadcast_poses() const {
  Broadcast out;
  for (const auto& [robot, ids] : atlas_.robot_index()) {
    auto& list = out[robot];
    for (const int id : ids) list.emplace_back(id, graph_.pose({robot, id}));
  }
  return out;
}

}  // namespace cradmap::backend
