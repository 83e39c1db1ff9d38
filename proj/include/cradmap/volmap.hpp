#ifndef CRADMAP_VOLMAP_HPP
#define CRADMAP_VOLMAP_HPP

#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "cradmap/frontend.hpp"
#include "cradmap/simworld.hpp"

namespace cradmap::volmap {

// Axis-aligned region, half-open: min <= p < max componentwise.
struct Bounds {
  Point3 min = Point3::Zero();
  Point3 max = Point3::Zero();

  double volume() const;
  bool contains(const Point3& p) const;
};

using VoxelIndex = std::array<int, 3>;

class VoxelGrid {
 public:
  VoxelGrid() = default;
  VoxelGrid(const Point3& origin, double voxel_size);

  static VoxelGrid FromCloud(std::span<const Point3> points, const Point3& origin,
                             double voxel_size);

  VoxelIndex index_of(const Point3& p) const;
  void insert(const Point3& p) { occupied_.insert(index_of(p)); }

  const Point3& origin() const { return origin_; }
  double voxel_size() const { return voxel_size_; }
  const std::set<VoxelIndex>& occupied() const { return occupied_; }

  bool operator==(const VoxelGrid& other) const {
    return origin_ == other.origin_ && voxel_size_ == other.voxel_size_ &&
           occupied_ == other.occupied_;
  }

 private:
  Point3 origin_ = Point3::Zero();
  double voxel_size_ = 0.05;
  std::set<VoxelIndex> occupied_;
};

struct GlobalMap {
  int robot_id = 0;
  PointCloud cloud;  // world frame
  VoxelGrid grid;
  int keyframe_count = 0;
};

// Union of every keyframe cloud moved into the world by its refined pose.
// Throws kMissingPose naming the first keyframe without one.
GlobalMap assemble_map(std::span<const Keyframe> keyframes,
                       const std::map<KeyframeKey, SE3Pose>& refined_poses,
                       double voxel_size, const Point3& origin = Point3::Zero());

// Same assembly from the feature observations alone (sparse baseline).
GlobalMap assemble_sparse_map(std::span<const Keyframe> keyframes,
                              const std::map<KeyframeKey, SE3Pose>& refined_poses,
                              const CameraIntrinsics& k, double voxel_size,
                              const Point3& origin = Point3::Zero());

// Voxels (origin = region.min) touched by some box face inside the region.
std::set<VoxelIndex> surface_voxels(const sim::Scene& scene, const Bounds& region,
                                    double voxel_size);

// Percentage of ground-truth surface voxels in the region that contain at
// least one map point. Throws kUndefinedMetric when the region holds no
// surface voxels.
double coverage(const PointCloud& cloud, const sim::Scene& scene, const Bounds& region,
                double voxel_size);

// Map points inside the region per cubic meter.
double density(const PointCloud& cloud, const Bounds& region);

// Bounding box of the surfaces seen from the poses, found by casting a
// coarse grid of camera rays; padded by `padding` on every side.
Bounds explored_region(const sim::Scene& scene, std::span<const SE3Pose> camera_poses,
                       const CameraIntrinsics& k, double max_range, int stride = 16,
                       double padding = 0.0);

// Extent along `axis` of the occupied voxels (origin = region.min) holding
// points inside the region; 0 when none.
double occupied_extent(const PointCloud& cloud, const Bounds& region, int axis,
                       double voxel_size);

// ASCII PLY with x, y, z vertex properties at 6 decimals.
void export_ply(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud import_ply(const std::filesystem::path& path);

}  // namespace cradmap::volmap

#endif  // CRADMAP_VOLMAP_HPP
