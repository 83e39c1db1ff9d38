#ifndef CRADMAP_GEOMETRY_HPP
#define CRADMAP_GEOMETRY_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace cradmap {

using Point3 = Eigen::Vector3d;
using PixelCoord = Eigen::Vector2d;
using Matrix3 = Eigen::Matrix3d;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

// Tangent-space vector: rotational part (radians) first, then translational
// part (meters).
using Twist6 = Eigen::Matrix<double, 6, 1>;

// Rigid-body transform. The rotation is a unit quaternion, renormalized on
// construction and after every composition.
class SE3Pose {
 public:
  SE3Pose();
  SE3Pose(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation);

  static SE3Pose Identity() { return SE3Pose(); }
  static SE3Pose FromTranslation(const Eigen::Vector3d& translation);
  static SE3Pose FromRotation(const Eigen::Quaterniond& rotation);

  const Eigen::Quaterniond& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  Matrix3 rotation_matrix() const { return rotation_.toRotationMatrix(); }

  // Rotation angle in [0, pi].
  double angle() const;

  SE3Pose inverse() const;
  SE3Pose operator*(const SE3Pose& other) const;
  Point3 operator*(const Point3& point) const;

  bool operator==(const SE3Pose& other) const;

 private:
  Eigen::Quaterniond rotation_;
  Eigen::Vector3d translation_;
};

SE3Pose compose(const SE3Pose& a, const SE3Pose& b);
SE3Pose inverse(const SE3Pose& pose);

SE3Pose exp_se3(const Twist6& twist);

// Throws kNearSingularity when the rotation angle is within 1e-6 of pi.
Twist6 log_se3(const SE3Pose& pose);

// Loop-closure relative transform T_n^-1 * T_j.
SE3Pose relative_constraint(const SE3Pose& t_n, const SE3Pose& t_j);

// Rotation angle and translation distance between two poses.
double rotation_distance(const SE3Pose& a, const SE3Pose& b);
double translation_distance(const SE3Pose& a, const SE3Pose& b);

struct CameraIntrinsics {
  double fx = 525.0;
  double fy = 525.0;
  double cx = 319.5;
  double cy = 239.5;
  int width = 640;
  int height = 480;

  // Throws kInvalidArgument when the invariants fx, fy > 0 and the principal
  // point lying inside the image do not hold.
  void validate() const;

  // Pixel centers sit on integer coordinates, origin at the top-left pixel.
  bool contains(const PixelCoord& pixel) const;
};

// d * K^-1 [u, 1]^T. Throws kInvalidDepth for non-positive or non-finite d.
Point3 back_project(const PixelCoord& pixel, double depth, const CameraIntrinsics& k);

// Pinhole projection of transform * point. Throws kBehindCamera when the
// transformed point has z <= 0.
PixelCoord project(const SE3Pose& transform, const Point3& point,
                   const CameraIntrinsics& k);

// 2x3 derivative of the pinhole projection with respect to a camera-frame
// point.
Eigen::Matrix<double, 2, 3> projection_jacobian(const Point3& camera_point,
                                                const CameraIntrinsics& k);

namespace lie {

Matrix3 hat(const Eigen::Vector3d& v);

Eigen::Quaterniond exp_so3(const Eigen::Vector3d& omega);
Matrix3 left_jacobian_so3(const Eigen::Vector3d& omega);
Matrix3 left_jacobian_so3_inverse(const Eigen::Vector3d& omega);

// Adjoint of a pose acting on (rotation, translation) twists:
// pose * exp(xi) * pose^-1 == exp(adjoint(pose) * xi).
Matrix6 adjoint(const SE3Pose& pose);

// exp(xi + d) ~= exp(left_jacobian(xi) d) * exp(xi).
Matrix6 left_jacobian(const Twist6& xi);

// exp(xi + d) ~= exp(xi) * exp(right_jacobian(xi) d).
Matrix6 right_jacobian(const Twist6& xi);
Matrix6 right_jacobian_inverse(const Twist6& xi);

}  // namespace lie

}  // namespace cradmap

#endif  // CRADMAP_GEOMETRY_HPP
