#include "cradmap/eval.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cradmap/error.hpp"

namespace cradmap::eval {

std::vector<TrajectorySample> parse_tum(std::istream& in, const std::string& source) {
  std::vector<TrajectorySample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream s(line);
    double v[8];
    std::string extra;
    for (double& x : v) {
      if (!(s >> x)) {
        throw Error(ErrorCode::kParse, source + ":" + std::to_string(line_no) +
                                           ": expected 8 numeric fields");
      }
    }
    if (s >> extra) {
      throw Error(ErrorCode::kParse,
                  source + ":" + std::to_string(line_no) + ": trailing field '" + extra + "'");
    }
    for (const double x : v) {
      if (!std::isfinite(x)) {
        throw Error(ErrorCode::kParse, source + ":" + std::to_string(line_no) + ": non-finite value");
      }
    }
    const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (q.norm() < 1e-12) {
      throw Error(ErrorCode::kParse, source + ":" + std::to_string(line_no) + ": zero quaternion");
    }
    out.push_back({v[0], SE3Pose(q, Eigen::Vector3d(v[1], v[2], v[3]))});
  }
  std::stable_sort(out.begin(), out.end(), [](const TrajectorySample& a, const TrajectorySample& b) {
    return a.timestamp < b.timestamp;
  });
  return out;
}

std::vector<TrajectorySample> load_tum(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open trajectory " + path.string());
  return parse_tum(in, path.string());
}

void write_tum(std::ostream& out, std::span<const TrajectorySample> samples) {
  char line[256];
  for (const TrajectorySample& s : samples) {
    const auto& t = s.pose.translation();
    const auto& q = s.pose.rotation();
    std::snprintf(line, sizeof(line), "%.9f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", s.timestamp,
                  t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w());
    out << line;
  }
}

void save_tum(const std::filesystem::path& path, std::span<const TrajectorySample> samples) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write trajectory " + path.string());
  write_tum(out, samples);
}

std::vector<std::pair<int, int>> associate(std::span<const TrajectorySample> est,
                                           std::span<const TrajectorySample> gt,
                                           double max_dt) {
  struct Candidate {
    double dt;
    double sum;
    int i;
    int j;
  };
  std::vector<Candidate> candidates;
  std::size_t lo = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = est[i].timestamp;
    while (lo < gt.size() && gt[lo].timestamp < t - max_dt) ++lo;
    for (std::size_t j = lo; j < gt.size() && gt[j].timestamp <= t + max_dt; ++j) {
      candidates.push_back({std::abs(gt[j].timestamp - t), gt[j].timestamp + t,
                            static_cast<int>(i), static_cast<int>(j)});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.dt != b.dt) return a.dt < b.dt;
    if (a.sum != b.sum) return a.sum < b.sum;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  std::vector<char> used_est(est.size(), 0);
  std::vector<char> used_gt(gt.size(), 0);
  std::vector<std::pair<int, int>> pairs;
  for (const Candidate& c : candidates) {
    if (used_est[c.i] || used_gt[c.j]) continue;
    used_est[c.i] = used_gt[c.j] = 1;
    pairs.emplace_back(c.i, c.j);
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

SE3Pose rigid_alignment(std::span<const Point3> est, std::span<const Point3> gt) {
  if (est.size() != gt.size() || est.size() < 3) {
    throw Error(ErrorCode::kDegenerateAlignment, "alignment needs at least 3 point pairs");
  }
  const double n = static_cast<double>(est.size());
  Point3 mean_e = Point3::Zero();
  Point3 mean_g = Point3::Zero();
  for (std::size_t i = 0; i < est.size(); ++i) {
    mean_e += est[i];
    mean_g += gt[i];
  }
  mean_e /= n;
  mean_g /= n;
  Matrix3 h = Matrix3::Zero();
  Matrix3 scatter = Matrix3::Zero();
  for (std::size_t i = 0; i < est.size(); ++i) {
    const Point3 de = est[i] - mean_e;
    h += de * (gt[i] - mean_g).transpose();
    scatter += de * de.transpose();
  }
  const Eigen::JacobiSVD<Matrix3> spread(scatter);
  const auto sv = spread.singularValues();
  if (!(sv[1] > 1e-12 * std::max(1.0, sv[0]))) {
    throw Error(ErrorCode::kDegenerateAlignment, "trajectory positions are collinear");
  }
  const Eigen::JacobiSVD<Matrix3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3 d = Matrix3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Matrix3 r = svd.matrixV() * d * svd.matrixU().transpose();
  return SE3Pose(Eigen::Quaterniond(r), mean_g - r * mean_e);
}

AteResult ate_rmse(std::span<const TrajectorySample> est,
                   std::span<const TrajectorySample> gt, bool align, double max_dt) {
  const auto pairs = associate(est, gt, max_dt);
  if (pairs.size() < 3) {
    throw Error(ErrorCode::kInvalidArgument,
                "need at least 3 associated poses, got " + std::to_string(pairs.size()));
  }
  std::vector<Point3> e;
  std::vector<Point3> g;
  for (const auto& [i, j] : pairs) {
    e.push_back(est[i].pose.translation());
    g.push_back(gt[j].pose.translation());
  }
  SE3Pose transform;
  if (align) transform = rigid_alignment(e, g);
  AteResult out;
  out.pairs = static_cast<int>(pairs.size());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double err = (g[i] - transform * e[i]).norm();
    sum += err;
    sum_sq += err * err;
  }
  out.ate_mean = sum / static_cast<double>(e.size());
  out.rmse = std::sqrt(sum_sq / static_cast<double>(e.size()));
  // Guard the mean/RMS ordering against last-bit rounding.
  out.rmse = std::max(out.rmse, out.ate_mean);
  return out;
}

}  // namespace cradmap::eval
