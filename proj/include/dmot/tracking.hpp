#pragma once

#include <Eigen/Dense>
#include <compare>
#include <cstdint>
#include <span>
#include <vector>

#include "dmot/geometry.hpp"

namespace dmot {

/// Globally unique track identity: creating robot + per-robot sequence
/// number. Ordering is lexicographic, which the distributed id consensus
/// relies on.
struct TrackId {
    int32_t robot = -1;
    int64_t seq = 0;
    auto operator<=>(const TrackId&) const = default;
};

/// Constant-velocity model over [p_x, p_y, v_x, v_y].
struct MotionModel {
    Eigen::Matrix4d A = Eigen::Matrix4d::Identity();
    Eigen::Matrix<double, 2, 4> H = Eigen::Matrix<double, 2, 4>::Zero();
    Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();
    double dt = 0.1;
};

/// White-acceleration discretization with intensity q (m^2/s^3).
MotionModel constant_velocity_model(double dt, double q);

struct Measurement {
    Point2 pos = Point2::Zero();
    PointCov cov = PointCov::Identity();
    int64_t stamp = 0;
    int32_t source = -1;
};

enum class TrackStatus { tentative, confirmed };

struct Track {
    TrackId id;
    Eigen::Vector4d x = Eigen::Vector4d::Zero();
    Eigen::Matrix4d P = Eigen::Matrix4d::Identity();
    int64_t lifetime = 0;
    int missed = 0;   // consecutive frames without any contributing measurement
    int hits = 0;     // frames with an associated measurement
    TrackStatus status = TrackStatus::tentative;
};

/// One consensus-filter broadcast: the sender's prior and its measurement
/// contribution in information form, all in the sender's local frame.
struct InfoMessage {
    TrackId track_id;
    Eigen::Vector4d prior = Eigen::Vector4d::Zero();
    Eigen::Vector4d u = Eigen::Vector4d::Zero();
    Eigen::Matrix4d U = Eigen::Matrix4d::Zero();
    int32_t sender = -1;
    int64_t stamp = 0;
};

/// Adaptive association gate on the squared Mahalanobis distance.
struct GateState {
    double tau = 2.0;
    double tau_base = 2.0;
};

struct GateParams {
    double alpha_trans = 8.0;  // gate inflation per meter of correction
    double alpha_rot = 10.0;   // gate inflation per radian of correction
    double decay = 0.9;        // geometric relaxation toward tau_base
};

/// Prediction step; increments lifetime.
void predict(Track& t, const MotionModel& model);

/// Squared Mahalanobis distance of a measurement to a track's predicted
/// position. Throws SingularInnovation for an ill-conditioned innovation
/// covariance.
double mahalanobis(const Measurement& z, const Track& t, const MotionModel& model);

/// Information form of a position measurement:
///   u = H^T R^-1 z,  U = H^T R^-1 H.
/// Throws SingularCovariance for a non-invertible covariance.
std::pair<Eigen::Vector4d, Eigen::Matrix4d> to_information(const Point2& z, const PointCov& r,
                                                           const MotionModel& model);

/// Exact inverse of to_information for rank-2 position information.
std::pair<Point2, PointCov> measurement_from_information(const Eigen::Vector4d& u,
                                                         const Eigen::Matrix4d& U,
                                                         const MotionModel& model);

/// Consensus-filter update with aggregated information (y, Y) and neighbor
/// priors, followed by the prediction step, so the stored state is the prior
/// for the next frame. Throws SingularGain when P^-1 + Y is not invertible.
void kcf_update(Track& t, const Eigen::Vector4d& y, const Eigen::Matrix4d& Y,
                std::span<const Eigen::Vector4d> neighbor_priors,
                const MotionModel& model, double consensus_gain_cap);

/// Gate adaptation: immediate inflation with the latest realignment
/// correction, geometric relaxation back toward the baseline.
GateState adapt_gate(const GateState& g, double correction_trans_m,
                     double correction_rot_rad, const GateParams& params);

struct AssociationResult {
    std::vector<std::pair<int, int>> matches;  // (measurement index, track index)
    std::vector<int> unmatched_measurements;
    std::vector<int> unmatched_tracks;
};

/// Global-nearest-neighbor association under the gate.
AssociationResult gnn_associate(std::span<const Measurement> measurements,
                                std::span<const Track> tracks,
                                const GateState& gate, const MotionModel& model);

}  // namespace dmot
