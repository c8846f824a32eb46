#include "dmot/tracking.hpp"

#include <cmath>

#include "dmot/errors.hpp"
#include "dmot/hungarian.hpp"

namespace dmot {

namespace {
constexpr double kGateSentinel = 1e9;
constexpr double kMaxCondition = 1e12;

double condition_2x2(const Eigen::Matrix2d& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
    const double lo = es.eigenvalues()(0);
    const double hi = es.eigenvalues()(1);
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    return hi / lo;
}
}  // namespace

MotionModel constant_velocity_model(double dt, double q) {
    MotionModel m;
    m.dt = dt;
    m.A.topRightCorner<2, 2>() = dt * Eigen::Matrix2d::Identity();
    m.H(0, 0) = 1.0;
    m.H(1, 1) = 1.0;
    const double dt3 = dt * dt * dt / 3.0;
    const double dt2 = dt * dt / 2.0;
    Eigen::Matrix2d qpp = q * dt3 * Eigen::Matrix2d::Identity();
    Eigen::Matrix2d qpv = q * dt2 * Eigen::Matrix2d::Identity();
    Eigen::Matrix2d qvv = q * dt * Eigen::Matrix2d::Identity();
    m.Q.topLeftCorner<2, 2>() = qpp;
    m.Q.topRightCorner<2, 2>() = qpv;
    m.Q.bottomLeftCorner<2, 2>() = qpv;
    m.Q.bottomRightCorner<2, 2>() = qvv;
    return m;
}

void predict(Track& t, const MotionModel& model) {
    t.x = model.A * t.x;
    const Eigen::Matrix4d p = model.A * t.P * model.A.transpose() + model.Q;
    t.P = 0.5 * (p + p.transpose());
    t.lifetime += 1;
}

double mahalanobis(const Measurement& z, const Track& t, const MotionModel& model) {
    const Eigen::Vector2d r = z.pos - model.H * t.x;
    const Eigen::Matrix2d s = model.H * t.P * model.H.transpose() + z.cov;
    if (condition_2x2(s) > kMaxCondition) {
        throw SingularInnovation("innovation covariance is not invertible");
    }
    return r.dot(s.inverse() * r);
}

std::pair<Eigen::Vector4d, Eigen::Matrix4d> to_information(const Point2& z, const PointCov& r,
                                                           const MotionModel& model) {
    if (condition_2x2(r) > kMaxCondition) {
        throw SingularCovariance("measurement covariance is not invertible");
    }
    const Eigen::Matrix2d rinv = r.inverse();
    const Eigen::Vector4d u = model.H.transpose() * rinv * z;
    const Eigen::Matrix4d U = model.H.transpose() * rinv * model.H;
    return {u, U};
}

std::pair<Point2, PointCov> measurement_from_information(const Eigen::Vector4d& u,
                                                         const Eigen::Matrix4d& U,
                                                         const MotionModel& model) {
    const Eigen::Matrix2d rinv = model.H * U * model.H.transpose();
    if (condition_2x2(rinv) > kMaxCondition) {
        throw SingularCovariance("information matrix does not encode a position measurement");
    }
    const PointCov r = rinv.inverse();
    const Point2 z = r * (model.H * u);
    return {z, symmetrized(r)};
}

void kcf_update(Track& t, const Eigen::Vector4d& y, const Eigen::Matrix4d& Y,
                std::span<const Eigen::Vector4d> neighbor_priors,
                const MotionModel& model, double consensus_gain_cap) {
    const bool has_information = Y.norm() > 0.0;

    Eigen::Matrix4d gain;
    if (has_information) {
        const Eigen::Matrix4d pinv = t.P.inverse();
        const Eigen::Matrix4d info = pinv + Y;
        Eigen::FullPivLU<Eigen::Matrix4d> lu(info);
        if (!lu.isInvertible()) {
            throw SingularGain("information gain matrix is not invertible");
        }
        gain = lu.inverse();
    } else {
        gain = t.P;  // (P^-1)^-1 without the numerical round trip
    }

    const Eigen::Vector4d prior = t.x;
    Eigen::Vector4d x = prior + gain * (y - Y * prior);

    if (!neighbor_priors.empty()) {
        Eigen::Vector4d disagreement = Eigen::Vector4d::Zero();
        for (const auto& p : neighbor_priors) disagreement += p - prior;
        Eigen::Matrix4d c = gain / (1.0 + gain.norm());
        const double cn = c.norm();
        if (consensus_gain_cap > 0.0 && cn > consensus_gain_cap) {
            c *= consensus_gain_cap / cn;
        }
        x += c * disagreement;
    }

    t.x = x;
    t.P = 0.5 * (gain + gain.transpose());
    predict(t, model);

    if (has_information) {
        t.missed = 0;
    } else {
        t.missed += 1;
    }
}

GateState adapt_gate(const GateState& g, double correction_trans_m,
                     double correction_rot_rad, const GateParams& params) {
    const double candidate =
        g.tau_base * (1.0 + params.alpha_trans * correction_trans_m +
                      params.alpha_rot * correction_rot_rad);
    const double relaxed = g.tau_base + params.decay * (g.tau - g.tau_base);
    GateState out = g;
    out.tau = std::max(candidate, relaxed);
    return out;
}

AssociationResult gnn_associate(std::span<const Measurement> measurements,
                                std::span<const Track> tracks,
                                const GateState& gate, const MotionModel& model) {
    AssociationResult result;
    const int n = static_cast<int>(measurements.size());
    const int m = static_cast<int>(tracks.size());
    if (n == 0 || m == 0) {
        for (int i = 0; i < n; ++i) result.unmatched_measurements.push_back(i);
        for (int j = 0; j < m; ++j) result.unmatched_tracks.push_back(j);
        return result;
    }

    Eigen::MatrixXd cost(n, m);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const double d = mahalanobis(measurements[i], tracks[j], model);
            cost(i, j) = d > gate.tau ? kGateSentinel : d;
        }
    }

    const std::vector<int> assignment = solve_assignment(cost);
    std::vector<char> track_used(m, 0);
    for (int i = 0; i < n; ++i) {
        const int j = assignment[i];
        if (j >= 0 && cost(i, j) < kGateSentinel) {
            result.matches.emplace_back(i, j);
            track_used[j] = 1;
        } else {
            result.unmatched_measurements.push_back(i);
        }
    }
    for (int j = 0; j < m; ++j) {
        if (!track_used[j]) result.unmatched_tracks.push_back(j);
    }
    return result;
}

}  // namespace dmot
