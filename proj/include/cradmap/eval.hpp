#ifndef CRADMAP_EVAL_HPP
#define CRADMAP_EVAL_HPP

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cradmap/geometry.hpp"

namespace cradmap::eval {

struct TrajectorySample {
  double timestamp = 0.0;
  SE3Pose pose;
};

// TUM trajectory text: `timestamp tx ty tz qx qy qz qw` per line, `#`
// comments. Output is sorted by timestamp. Malformed lines raise kParse
// with `source:line`.
std::vector<TrajectorySample> parse_tum(std::istream& in, const std::string& source);
std::vector<TrajectorySample> load_tum(const std::filesystem::path& path);

void write_tum(std::ostream& out, std::span<const TrajectorySample> samples);
void save_tum(const std::filesystem::path& path, std::span<const TrajectorySample> samples);

// Greedy matching by smallest |dt| first; each sample is used at most once.
// Returns (est index, gt index) pairs ordered by est index.
std::vector<std::pair<int, int>> associate(std::span<const TrajectorySample> est,
                                           std::span<const TrajectorySample> gt,
                                           double max_dt);

// Rigid transform minimizing sum |gt_i - (R est_i + t)|^2. Throws
// kDegenerateAlignment when the estimate points are collinear.
SE3Pose rigid_alignment(std::span<const Point3> est, std::span<const Point3> gt);

struct AteResult {
  double ate_mean = 0.0;  // meters
  double rmse = 0.0;      // meters
  int pairs = 0;
};

// Translational error statistics over associated pairs, optionally after
// rigid alignment. Needs at least 3 pairs.
AteResult ate_rmse(std::span<const TrajectorySample> est,
                   std::span<const TrajectorySample> gt, bool align,
                   double max_dt = 0.02);

}  // namespace cradmap::eval

#endif  // CRADMAP_EVAL_HPP
