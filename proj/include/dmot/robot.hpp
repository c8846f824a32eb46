#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "dmot/network.hpp"
#include "dmot/registration.hpp"
#include "dmot/tracking.hpp"

namespace dmot {

struct TrackerParams {
    double process_noise = 0.5;     // white-acceleration intensity q, m^2/s^3
    double v_max = 2.0;             // velocity std bound for new tracks, m/s
    int n_confirm = 3;              // associations before a track is confirmed
    int n_miss_max = 10;            // consecutive misses before deletion
    double tau_gate = 2.0;          // baseline association gate (squared Mahalanobis)
    GateParams gate;
    double adopt_gate_scale = 4.0;  // adoption gate = scale * current tau
    int n_unbind = 10;              // strikes before a foreign-id binding is dropped
    double consensus_gain_cap = 0.1;
    double dup_radius = 0.75;       // m, duplicate-track consolidation distance
    int dup_frames = 10;            // consecutive frames before consolidation
    bool use_alignment_cov = true;  // fold alignment uncertainty into received covariances
    bool loose_pairing = false;     // pair foreign-track detections with nearby local tracks
    double loose_pair_radius = 3.0; // m
    double loose_pair_vel_tol = 0.6;  // m/s, velocity agreement required for a loose pair
    int eta_window = 50;            // frames of co-detection history kept per neighbor
};

/// Per-robot tracking pipeline: local association, consensus fusion, track
/// lifecycle with distributed id consensus, and per-neighbor frame-alignment
/// state. Single-writer; incoming messages are immutable values.
class RobotEngine {
public:
    RobotEngine(int32_t id, const MotionModel& model, const TrackerParams& params,
                const RegistrationParams& reg, const AlignmentCovScale& cov_scale);

    /// Register a neighbor with the initial alignment mapping its frame into
    /// ours.
    void add_neighbor(int32_t j, const NoisyTransform& initial);

    /// Current sensing region test (local-frame position -> can this robot
    /// see it). Used to decide whether an unexplained incoming detection
    /// could be a misaligned duplicate of something seen locally. Defaults
    /// to everything visible.
    void set_visibility(std::function<bool(const Point2&)> visible) {
        visibility_ = std::move(visible);
    }

    /// Per-frame growth of alignment uncertainty while no realignment
    /// happens (both robots keep drifting under a stale estimate).
    void set_alignment_drift_rate(const PoseCov& per_frame) {
        alignment_drift_rate_ = per_frame;
    }

    // Per-frame pipeline, in call order.
    std::vector<InfoMessage> local_step(int64_t frame, std::vector<Measurement> measurements);
    void ingest(int64_t frame, const std::vector<Envelope>& inbox);
    void fuse_and_manage(int64_t frame);
    std::optional<AlignmentResult> realign_static(int64_t frame, int32_t j,
                                                  const LandmarkMap& own_map,
                                                  const LandmarkMap& neighbor_map);
    std::optional<AlignmentResult> realign_dynamic(int64_t frame, int32_t j);
    /// Gate adaptation from this frame's realignment corrections and buffer
    /// upkeep. Call last.
    void finish_frame(int64_t frame);

    int32_t id() const { return id_; }
    const GateState& gate() const { return gate_; }
    const MotionModel& model() const { return model_; }
    const std::map<TrackId, Track>& tracks() const { return tracks_; }

    struct Stats {
        int64_t spawned = 0;
        int64_t adopted = 0;
        int64_t aliased = 0;
        int64_t merged = 0;
        int64_t confirmed = 0;
        int64_t deleted = 0;
        int64_t unbound = 0;
        int64_t quarantined = 0;
    };
    const Stats& stats() const { return stats_; }
    const NoisyTransform& alignment(int32_t j) const;
    void set_alignment(int32_t j, const NoisyTransform& t);
    /// Count of time-matched co-detections with neighbor j in the window.
    int eta(int32_t j) const;

private:
    struct PairObs {
        int64_t frame = 0;
        Point2 predicted = Point2::Zero();  // H x̂ at observation time, local frame
        Point2 z_own = Point2::Zero();      // local measurement, local frame
        Point2 recv_raw = Point2::Zero();   // neighbor measurement, sender frame
    };

    struct NeighborState {
        NoisyTransform align;
        std::deque<PairObs> pairs;
    };

    struct Accum {
        Eigen::Vector4d y = Eigen::Vector4d::Zero();
        Eigen::Matrix4d Y = Eigen::Matrix4d::Zero();
        std::vector<Eigen::Vector4d> priors;
        bool any_meas = false;
    };

    struct PendingPair {
        int32_t sender = -1;
        TrackId tid;
        Point2 recv_raw = Point2::Zero();
        Point2 recv_local = Point2::Zero();
        Eigen::Vector4d prior_local = Eigen::Vector4d::Zero();
    };

    TrackId resolve(TrackId id) const;
    void rekey(TrackId from, TrackId to);
    Eigen::Vector4d state_into_local(const Eigen::Vector4d& sender_state,
                                     const Pose2& align) const;
    void record_pairs(int64_t frame, const std::vector<PendingPair>& pending);
    void spawn_track(const Measurement& z);
    void adopt_track(const InfoMessage& msg, const Eigen::Vector4d& local_prior,
                     const std::optional<std::pair<Point2, PointCov>>& local_meas);
    void consolidate_duplicates();
    void note_correction(double trans_m, double rot_rad);

    int32_t id_;
    MotionModel model_;
    TrackerParams params_;
    RegistrationParams reg_;
    AlignmentCovScale cov_scale_;
    GateState gate_;

    std::map<TrackId, Track> tracks_;
    std::map<TrackId, TrackId> alias_;  // foreign/retired id -> kept id
    std::map<TrackId, int> strikes_;    // consecutive gate failures per incoming id
    int64_t next_seq_ = 1;
    std::map<int32_t, NeighborState> neighbors_;
    std::map<std::pair<TrackId, TrackId>, int> dup_counter_;
    std::function<bool(const Point2&)> visibility_;
    PoseCov alignment_drift_rate_ = PoseCov::Zero();

    // Per-frame scratch.
    std::vector<Measurement> frame_meas_;
    std::map<TrackId, int> local_match_;  // track -> index into frame_meas_
    std::vector<int> unmatched_meas_;
    std::map<TrackId, Accum> accum_;
    std::set<TrackId> born_this_frame_;
    double frame_corr_trans_ = 0.0;
    double frame_corr_rot_ = 0.0;
    Stats stats_;
};

}  // namespace dmot
