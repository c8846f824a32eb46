#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>

namespace dmot {

using Point2 = Eigen::Vector2d;
using PointCov = Eigen::Matrix2d;
using PoseCov = Eigen::Matrix3d;  // over (x, y, theta)

/// Planar rigid transform. theta is kept normalized to (-pi, pi].
struct Pose2 {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;

    Pose2() = default;
    Pose2(double x_, double y_, double theta_);

    static Pose2 identity() { return {}; }

    Eigen::Vector2d translation() const { return {x, y}; }
    Eigen::Matrix2d rotation() const;
    Eigen::Matrix3d homogeneous() const;
};

/// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

/// Head-to-tail composition a ⊕ b.
Pose2 compose(const Pose2& a, const Pose2& b);

Pose2 inverse(const Pose2& a);

Point2 transform_point(const Pose2& t, const Point2& p);

/// A pose estimate with its covariance, stamped with the frame it was
/// produced at. Used for inter-robot frame alignments.
struct NoisyTransform {
    Pose2 pose;
    PoseCov cov = PoseCov::Zero();
    int64_t stamp = 0;
};

struct TransformError {
    double translation_m = 0.0;
    double heading_deg = 0.0;
};

/// Magnitude of the discrepancy est^-1 ⊕ truth.
TransformError transform_error(const Pose2& est, const Pose2& truth);

/// Jacobian of (pose · z) with respect to the pose parameters (x, y, theta).
Eigen::Matrix<double, 2, 3> point_jacobian(const Pose2& pose, const Point2& z);

/// Map a body-frame observation into the robot's local frame, folding the
/// robot's pose uncertainty into the measurement covariance:
///   R_out = F Sigma F^T + G R G^T, F = [I | dR/dtheta z], G = R(theta).
std::pair<Point2, PointCov> propagate_into_local(const Pose2& pose_est,
                                                 const PoseCov& pose_cov,
                                                 const Point2& z,
                                                 const PointCov& r);

/// Map a measurement across a frame alignment, inflating the covariance with
/// the alignment uncertainty pushed through the point Jacobian (heading
/// uncertainty scales with the lever arm).
std::pair<Point2, PointCov> propagate_into_neighbor(const NoisyTransform& alignment,
                                                    const Point2& z,
                                                    const PointCov& r);

/// First-order covariance of the head-to-tail composition a ⊕ b, with the
/// two inputs independent.
PoseCov compose_cov(const Pose2& a, const PoseCov& cov_a,
                    const Pose2& b, const PoseCov& cov_b);

inline PointCov symmetrized(const PointCov& m) { return 0.5 * (m + m.transpose()); }
inline PoseCov symmetrized(const PoseCov& m) { return 0.5 * (m + m.transpose()); }

}  // namespace dmot
