#include "cradmap/geometry.hpp"

#include <cmath>
#include <sstream>

#include "cradmap/error.hpp"

namespace cradmap {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLogSingularityMargin = 1e-6;

}  // namespace

SE3Pose::SE3Pose()
    : rotation_(Eigen::Quaterniond::Identity()),
      translation_(Eigen::Vector3d::Zero()) {}

SE3Pose::SE3Pose(const Eigen::Quaterniond& rotation,
                 const Eigen::Vector3d& translation)
    : rotation_(rotation.normalized()), translation_(translation) {}

SE3Pose SE3Pose::FromTranslation(const Eigen::Vector3d& translation) {
  return SE3Pose(Eigen::Quaterniond::Identity(), translation);
}

SE3Pose SE3Pose::FromRotation(const Eigen::Quaterniond& rotation) {
  return SE3Pose(rotation, Eigen::Vector3d::Zero());
}

double SE3Pose::angle() const {
  return 2.0 * std::atan2(rotation_.vec().norm(), std::abs(rotation_.w()));
}

SE3Pose SE3Pose::inverse() const {
  const Eigen::Quaterniond inv = rotation_.conjugate();
  return SE3Pose(inv, -(inv * translation_));
}

SE3Pose SE3Pose::operator*(const SE3Pose& other) const {
  return SE3Pose(rotation_ * other.rotation_,
                 rotation_ * other.translation_ + translation_);
}

Point3 SE3Pose::operator*(const Point3& point) const {
  return rotation_ * point + translation_;
}

bool SE3Pose::operator==(const SE3Pose& other) const {
  return rotation_.coeffs() == other.rotation_.coeffs() &&
         translation_ == other.translation_;
}

SE3Pose compose(const SE3Pose& a, const SE3Pose& b) { return a * b; }

SE3Pose inverse(const SE3Pose& pose) { return pose.inverse(); }

SE3Pose exp_se3(const Twist6& twist) {
  const Eigen::Vector3d omega = twist.head<3>();
  const Eigen::Vector3d v = twist.tail<3>();
  return SE3Pose(lie::exp_so3(omega), lie::left_jacobian_so3(omega) * v);
}

Twist6 log_se3(const SE3Pose& pose) {
  Eigen::Quaterniond q = pose.rotation();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const double n = q.vec().norm();
  const double theta = 2.0 * std::atan2(n, q.w());
  if (theta >= kPi - kLogSingularityMargin) {
    std::ostringstream msg;
    msg << "rotation angle " << theta << " too close to pi for log";
    throw Error(ErrorCode::kNearSingularity, msg.str());
  }
  const Eigen::Vector3d omega =
      n > 1e-12 ? Eigen::Vector3d((theta / n) * q.vec())
                : Eigen::Vector3d((2.0 / q.w()) * q.vec());
  Twist6 out;
  out.head<3>() = omega;
  out.tail<3>() = lie::left_jacobian_so3_inverse(omega) * pose.translation();
  return out;
}

SE3Pose relative_constraint(const SE3Pose& t_n, const SE3Pose& t_j) {
  return t_n.inverse() * t_j;
}

double rotation_distance(const SE3Pose& a, const SE3Pose& b) {
  return (a.inverse() * b).angle();
}

double translation_distance(const SE3Pose& a, const SE3Pose& b) {
  return (a.translation() - b.translation()).norm();
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw Error(ErrorCode::kInvalidArgument,
                "principal point must lie inside the image");
  }
}

bool CameraIntrinsics::contains(const PixelCoord& pixel) const {
  return pixel.x() >= 0.0 && pixel.y() >= 0.0 &&
         pixel.x() <= static_cast<double>(width - 1) &&
         pixel.y() <= static_cast<double>(height - 1);
}

Point3 back_project(const PixelCoord& pixel, double depth,
                    const CameraIntrinsics& k) {
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    std::ostringstream msg;
    msg << "depth " << depth << " is not a positive finite value";
    throw Error(ErrorCode::kInvalidDepth, msg.str());
  }
  if (!pixel.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "pixel coordinate is not finite");
  }
  return Point3((pixel.x() - k.cx) / k.fx * depth,
                (pixel.y() - k.cy) / k.fy * depth, depth);
}

PixelCoord project(const SE3Pose& transform, const Point3& point,
                   const CameraIntrinsics& k) {
  const Point3 p = transform * point;
  if (!(p.z() > 0.0)) {
    std::ostringstream msg;
    msg << "point has camera depth " << p.z();
    throw Error(ErrorCode::kBehindCamera, msg.str());
  }
  return PixelCoord(k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy);
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const Point3& p,
                                                const CameraIntrinsics& k) {
  const double inv_z = 1.0 / p.z();
  const double inv_z2 = inv_z * inv_z;
  Eigen::Matrix<double, 2, 3> j;
  j << k.fx * inv_z, 0.0, -k.fx * p.x() * inv_z2,
       0.0, k.fy * inv_z, -k.fy * p.y() * inv_z2;
  return j;
}

namespace lie {

Matrix3 hat(const Eigen::Vector3d& v) {
  Matrix3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Quaterniond exp_so3(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  if (theta < 1e-8) {
    Eigen::Quaterniond q(1.0, 0.5 * omega.x(), 0.5 * omega.y(), 0.5 * omega.z());
    return q.normalized();
  }
  const double half = 0.5 * theta;
  const Eigen::Vector3d axis_part = (std::sin(half) / theta) * omega;
  return Eigen::Quaterniond(std::cos(half), axis_part.x(), axis_part.y(),
                            axis_part.z());
}

Matrix3 left_jacobian_so3(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  const Matrix3 w = hat(omega);
  if (theta < 1e-5) {
    return Matrix3::Identity() + 0.5 * w + (1.0 / 6.0) * w * w;
  }
  const double t2 = theta * theta;
  return Matrix3::Identity() + ((1.0 - std::cos(theta)) / t2) * w +
         ((theta - std::sin(theta)) / (t2 * theta)) * w * w;
}

Matrix3 left_jacobian_so3_inverse(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  const Matrix3 w = hat(omega);
  double c;
  if (theta < 1e-5) {
    c = 1.0 / 12.0 + theta * theta / 720.0;
  } else {
    c = 1.0 / (theta * theta) -
        (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  return Matrix3::Identity() - 0.5 * w + c * w * w;
}

Matrix6 adjoint(const SE3Pose& pose) {
  const Matrix3 r = pose.rotation_matrix();
  Matrix6 ad = Matrix6::Zero();
  ad.topLeftCorner<3, 3>() = r;
  ad.bottomRightCorner<3, 3>() = r;
  ad.bottomLeftCorner<3, 3>() = hat(pose.translation()) * r;
  return ad;
}

namespace {

// Translation-rotation coupling block of the SE(3) left Jacobian.
Matrix3 coupling_block(const Eigen::Vector3d& rho, const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Matrix3 rx = hat(rho);
  const Matrix3 px = hat(phi);
  double c1, c2, c3;
  if (theta < 1e-2) {
    const double t2 = theta * theta;
    c1 = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
    c2 = 1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40320.0;
    c3 = 1.0 / 120.0 - t2 / 2520.0;
  } else {
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    const double t2 = theta * theta;
    c1 = (theta - s) / (t2 * theta);
    c2 = (t2 + 2.0 * c - 2.0) / (2.0 * t2 * t2);
    c3 = (2.0 * theta - 3.0 * s + theta * c) / (2.0 * t2 * t2 * theta);
  }
  const Matrix3 pr = px * rx;
  const Matrix3 rp = rx * px;
  const Matrix3 prp = pr * px;
  return 0.5 * rx + c1 * (pr + rp + prp) +
         c2 * (px * pr + rp * px - 3.0 * prp) +
         c3 * (prp * px + px * prp);
}

}  // namespace

Matrix6 left_jacobian(const Twist6& xi) {
  const Eigen::Vector3d phi = xi.head<3>();
  const Eigen::Vector3d rho = xi.tail<3>();
  const Matrix3 j = left_jacobian_so3(phi);
  Matrix6 out = Matrix6::Zero();
  out.topLeftCorner<3, 3>() = j;
  out.bottomRightCorner<3, 3>() = j;
  out.bottomLeftCorner<3, 3>() = coupling_block(rho, phi);
  return out;
}

Matrix6 right_jacobian(const Twist6& xi) { return left_jacobian(-xi); }

Matrix6 right_jacobian_inverse(const Twist6& xi) {
  const Twist6 neg = -xi;
  const Eigen::Vector3d phi = neg.head<3>();
  const Eigen::Vector3d rho = neg.tail<3>();
  const Matrix3 j_inv = left_jacobian_so3_inverse(phi);
  Matrix6 out = Matrix6::Zero();
  out.topLeftCorner<3, 3>() = j_inv;
  out.bottomRightCorner<3, 3>() = j_inv;
  out.bottomLeftCorner<3, 3>() = -j_inv * coupling_block(rho, phi) * j_inv;
  return out;
}

}  // namespace lie

}  // namespace cradmap
