#include "cradmap/volmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "cradmap/error.hpp"

namespace cradmap::volmap {

double Bounds::volume() const {
  const Point3 d = (max - min).cwiseMax(0.0);
  return d.x() * d.y() * d.z();
}

bool Bounds::contains(const Point3& p) const {
  return (p.array() >= min.array()).all() && (p.array() < max.array()).all();
}

VoxelGrid::VoxelGrid(const Point3& origin, double voxel_size)
    : origin_(origin), voxel_size_(voxel_size) {
  if (!(voxel_size > 0.0)) throw Error(ErrorCode::kInvalidArgument, "voxel size must be positive");
}

VoxelGrid VoxelGrid::FromCloud(std::span<const Point3> points, const Point3& origin,
                               double voxel_size) {
  VoxelGrid grid(origin, voxel_size);
  for (const Point3& p : points) grid.insert(p);
  return grid;
}

VoxelIndex VoxelGrid::index_of(const Point3& p) const {
  const Point3 q = (p - origin_) / voxel_size_;
  return {static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y())),
          static_cast<int>(std::floor(q.z()))};
}

GlobalMap assemble_map(std::span<const Keyframe> keyframes,
                       const std::map<KeyframeKey, SE3Pose>& refined_poses,
                       double voxel_size, const Point3& origin) {
  GlobalMap map;
  map.grid = VoxelGrid(origin, voxel_size);
  if (!keyframes.empty()) map.robot_id = keyframes.front().robot_id;
  for (const Keyframe& kf : keyframes) {
    auto it = refined_poses.find(kf.key());
    if (it == refined_poses.end()) {
      throw Error(ErrorCode::kMissingPose,
                  "no refined pose for keyframe (" + std::to_string(kf.robot_id) + ", " +
                      std::to_string(kf.keyframe_id) + ")");
    }
    for (const Point3& x : kf.cloud.points) {
      const Point3 p = it->second * x;
      map.cloud.points.push_back(p);
      map.grid.insert(p);
    }
    ++map.keyframe_count;
  }
  return map;
}

GlobalMap assemble_sparse_map(std::span<const Keyframe> keyframes,
                              const std::map<KeyframeKey, SE3Pose>& refined_poses,
                              const CameraIntrinsics& k, double voxel_size,
                              const Point3& origin) {
  std::vector<Keyframe> sparse;
  sparse.reserve(keyframes.size());
  for (const Keyframe& kf : keyframes) {
    Keyframe s;
    s.robot_id = kf.robot_id;
    s.keyframe_id = kf.keyframe_id;
    for (const auto& obs : kf.observations) {
      if (obs.depth > 0.0) s.cloud.points.push_back(back_project(obs.pixel, obs.depth, k));
    }
    sparse.push_back(std::move(s));
  }
  return assemble_map(sparse, refined_poses, voxel_size, origin);
}

std::set<VoxelIndex> surface_voxels(const sim::Scene& scene, const Bounds& region,
                                    double voxel_size) {
  if (!(voxel_size > 0.0)) throw Error(ErrorCode::kInvalidArgument, "voxel size must be positive");
  const Point3& o = region.min;
  std::set<VoxelIndex> out;
  for (const sim::Box& box : scene.boxes()) {
    const Point3 lo = box.min_corner();
    const Point3 hi = box.max_corner();
    for (int a = 0; a < 3; ++a) {
      const int b = (a + 1) % 3;
      const int c = (a + 2) % 3;
      const double b_lo = std::max(lo[b], region.min[b]);
      const double b_hi = std::min(hi[b], region.max[b]);
      const double c_lo = std::max(lo[c], region.min[c]);
      const double c_hi = std::min(hi[c], region.max[c]);
      if (!(b_hi > b_lo) || !(c_hi > c_lo)) continue;
      const int ib0 = static_cast<int>(std::floor((b_lo - o[b]) / voxel_size));
      const int ib1 = static_cast<int>(std::ceil((b_hi - o[b]) / voxel_size)) - 1;
      const int ic0 = static_cast<int>(std::floor((c_lo - o[c]) / voxel_size));
      const int ic1 = static_cast<int>(std::ceil((c_hi - o[c]) / voxel_size)) - 1;
      for (const double face : {lo[a], hi[a]}) {
        if (face < region.min[a] || face >= region.max[a]) continue;
        const int ia = static_cast<int>(std::floor((face - o[a]) / voxel_size));
        for (int ib = ib0; ib <= ib1; ++ib) {
          for (int ic = ic0; ic <= ic1; ++ic) {
            VoxelIndex v;
            v[a] = ia;
            v[b] = ib;
            v[c] = ic;
            out.insert(v);
          }
        }
      }
    }
  }
  return out;
}

double coverage(const PointCloud& cloud, const sim::Scene& scene, const Bounds& region,
                double voxel_size) {
  if (!(region.volume() > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "explored region has no volume");
  }
  const std::set<VoxelIndex> truth = surface_voxels(scene, region, voxel_size);
  if (truth.empty()) {
    throw Error(ErrorCode::kUndefinedMetric, "no ground-truth surface voxels in region");
  }
  VoxelGrid grid(region.min, voxel_size);
  for (const Point3& p : cloud.points) {
    if (region.contains(p)) grid.insert(p);
  }
  std::size_t hit = 0;
  for (const VoxelIndex& v : grid.occupied()) hit += truth.count(v);
  return 100.0 * static_cast<double>(hit) / static_cast<double>(truth.size());
}

double density(const PointCloud& cloud, const Bounds& region) {
  const double volume = region.volume();
  if (!(volume > 0.0)) throw Error(ErrorCode::kInvalidArgument, "region has no volume");
  const auto inside = std::count_if(cloud.points.begin(), cloud.points.end(),
                                    [&](const Point3& p) { return region.contains(p); });
  return static_cast<double>(inside) / volume;
}

Bounds explored_region(const sim::Scene& scene, std::span<const SE3Pose> camera_poses,
                       const CameraIntrinsics& k, double max_range, int stride,
                       double padding) {
  if (stride < 1) throw Error(ErrorCode::kInvalidArgument, "stride must be >= 1");
  Point3 lo = Point3::Constant(std::numeric_limits<double>::infinity());
  Point3 hi = -lo;
  bool any = false;
  for (const SE3Pose& pose : camera_poses) {
    for (int row = 0; row < k.height; row += stride) {
      for (int col = 0; col < k.width; col += stride) {
        const PixelCoord pixel(col, row);
        const double d = sim::depth_along_ray(scene, pose, k, pixel, max_range);
        if (!(d > 0.0)) continue;
        const Point3 p = pose * back_project(pixel, d, k);
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
        any = true;
      }
    }
  }
  if (!any) return Bounds{};
  return Bounds{lo - Point3::Constant(padding), hi + Point3::Constant(padding)};
}

double occupied_extent(const PointCloud& cloud, const Bounds& region, int axis,
                       double voxel_size) {
  if (axis < 0 || axis > 2) throw Error(ErrorCode::kInvalidArgument, "axis must be 0, 1 or 2");
  VoxelGrid grid(region.min, voxel_size);
  for (const Point3& p : cloud.points) {
    if (region.contains(p)) grid.insert(p);
  }
  if (grid.occupied().empty()) return 0.0;
  int lo = std::numeric_limits<int>::max();
  int hi = std::numeric_limits<int>::min();
  for (const VoxelIndex& v : grid.occupied()) {
    lo = std::min(lo, v[axis]);
    hi = std::max(hi, v[axis]);
  }
  return static_cast<double>(hi - lo + 1) * voxel_size;
}

void export_ply(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  char line[128];
  for (const Point3& p : cloud.points) {
    std::snprintf(line, sizeof(line), "%.6f %.6f %.6f\n", p.x(), p.y(), p.z());
    out << line;
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

PointCloud import_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  std::size_t count = 0;
  bool saw_magic = false;
  bool saw_end = false;
  while (std::getline(in, line)) {
    if (!saw_magic) {
      if (line != "ply") throw Error(ErrorCode::kParse, path.string() + ": not a PLY file");
      saw_magic = true;
      continue;
    }
    if (line.rfind("format", 0) == 0 && line.find("ascii") == std::string::npos) {
      throw Error(ErrorCode::kParse, path.string() + ": only ASCII PLY is supported");
    }
    if (line.rfind("element vertex", 0) == 0) count = std::stoul(line.substr(15));
    if (line == "end_header") {
      saw_end = true;
      break;
    }
  }
  if (!saw_end) throw Error(ErrorCode::kParse, path.string() + ": missing end_header");
  PointCloud cloud;
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) {
      throw Error(ErrorCode::kParse, path.string() + ": expected " + std::to_string(count) +
                                         " vertices, got " + std::to_string(i));
    }
    std::istringstream s(line);
    Point3 p;
    if (!(s >> p.x() >> p.y() >> p.z())) {
      throw Error(ErrorCode::kParse, path.string() + ": bad vertex line " + std::to_string(i));
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

}  // namespace cradmap::volmap
