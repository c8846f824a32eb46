#include "dmot/geometry.hpp"

#include <cmath>

namespace dmot {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Pose2::Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}

Eigen::Matrix2d Pose2::rotation() const {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    Eigen::Matrix2d r;
    r << c, -s, s, c;
    return r;
}

Eigen::Matrix3d Pose2::homogeneous() const {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m.topLeftCorner<2, 2>() = rotation();
    m(0, 2) = x;
    m(1, 2) = y;
    return m;
}

double wrap_angle(double a) {
    a = std::fmod(a + kPi, 2.0 * kPi);
    if (a <= 0.0) a += 2.0 * kPi;
    return a - kPi;
}

Pose2 compose(const Pose2& a, const Pose2& b) {
    const double c = std::cos(a.theta);
    const double s = std::sin(a.theta);
    return Pose2(a.x + c * b.x - s * b.y,
                 a.y + s * b.x + c * b.y,
                 a.theta + b.theta);
}

Pose2 inverse(const Pose2& a) {
    const double c = std::cos(a.theta);
    const double s = std::sin(a.theta);
    return Pose2(-(c * a.x + s * a.y), s * a.x - c * a.y, -a.theta);
}

Point2 transform_point(const Pose2& t, const Point2& p) {
    const double c = std::cos(t.theta);
    const double s = std::sin(t.theta);
    return {t.x + c * p.x() - s * p.y(), t.y + s * p.x() + c * p.y()};
}

TransformError transform_error(const Pose2& est, const Pose2& truth) {
    const Pose2 delta = compose(inverse(est), truth);
    TransformError e;
    e.translation_m = std::hypot(delta.x, delta.y);
    e.heading_deg = std::abs(delta.theta) * 180.0 / kPi;
    return e;
}

Eigen::Matrix<double, 2, 3> point_jacobian(const Pose2& pose, const Point2& z) {
    const double c = std::cos(pose.theta);
    const double s = std::sin(pose.theta);
    Eigen::Matrix<double, 2, 3> f;
    f << 1.0, 0.0, -s * z.x() - c * z.y(),
         0.0, 1.0,  c * z.x() - s * z.y();
    return f;
}

std::pair<Point2, PointCov> propagate_into_local(const Pose2& pose_est,
                                                 const PoseCov& pose_cov,
                                                 const Point2& z,
                                                 const PointCov& r) {
    const Eigen::Matrix<double, 2, 3> f = point_jacobian(pose_est, z);
    const Eigen::Matrix2d g = pose_est.rotation();
    PointCov out = f * pose_cov * f.transpose() + g * r * g.transpose();
    return {transform_point(pose_est, z), symmetrized(out)};
}

std::pair<Point2, PointCov> propagate_into_neighbor(const NoisyTransform& alignment,
                                                    const Point2& z,
                                                    const PointCov& r) {
    const Eigen::Matrix2d j = alignment.pose.rotation();
    const Eigen::Matrix<double, 2, 3> f = point_jacobian(alignment.pose, z);
    PointCov out = j * r * j.transpose() + f * alignment.cov * f.transpose();
    return {transform_point(alignment.pose, z), symmetrized(out)};
}

PoseCov compose_cov(const Pose2& a, const PoseCov& cov_a,
                    const Pose2& b, const PoseCov& cov_b) {
    const double c = std::cos(a.theta);
    const double s = std::sin(a.theta);
    Eigen::Matrix3d ja = Eigen::Matrix3d::Identity();
    ja(0, 2) = -s * b.x - c * b.y;
    ja(1, 2) = c * b.x - s * b.y;
    Eigen::Matrix3d jb = Eigen::Matrix3d::Identity();
    jb.topLeftCorner<2, 2>() = a.rotation();
    return symmetrized(PoseCov(ja * cov_a * ja.transpose() + jb * cov_b * jb.transpose()));
}

}  // namespace dmot
