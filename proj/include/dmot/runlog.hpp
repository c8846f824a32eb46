#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dmot/geometry.hpp"
#include "dmot/tracking.hpp"

namespace dmot {

struct RobotPoseRow {
    int64_t frame = 0;
    int32_t robot = -1;
    Pose2 true_world;  // trajectory ground truth, world frame
    Pose2 est_local;   // the robot's own pose estimate, in its local frame
};

struct ObjectRow {
    int64_t frame = 0;
    int32_t object = -1;
    Point2 pos = Point2::Zero();  // world frame
};

struct TrackRow {
    int64_t frame = 0;
    int32_t robot = -1;
    TrackId id;
    int status = 0;  // 0 tentative, 1 confirmed
    Eigen::Vector4d x = Eigen::Vector4d::Zero();
    double trace_p = 0.0;
};

enum class AlignEvent { carried = 0, static_landmarks = 1, dynamic_objects = 2 };

struct AlignRow {
    int64_t frame = 0;
    int32_t robot = -1;     // holder of the estimate
    int32_t neighbor = -1;  // frame being mapped into the holder's
    Pose2 est;
    Pose2 truth;
    AlignEvent event = AlignEvent::carried;
    int pair_count = 0;
    double corr_trans_m = 0.0;
    double corr_rot_rad = 0.0;
};

struct TimingRow {
    int64_t frame = 0;
    int32_t robot = -1;
    std::string stage;
    double millis = 0.0;
};

struct CommTraceRow {
    int64_t frame = 0;
    int32_t sender = -1;
    int32_t recipient = -1;
    std::string kind;
    size_t bytes = 0;
};

/// Complete record of one scenario run. Everything except the wall-clock
/// timings is a pure function of the scenario configuration.
struct RunLog {
    double frame_rate_hz = 10.0;
    double d_match_m = 1.0;
    std::vector<RobotPoseRow> robot_poses;
    std::vector<ObjectRow> objects;
    std::vector<TrackRow> tracks;
    std::vector<AlignRow> alignments;
    std::vector<TimingRow> timings;
    std::vector<CommTraceRow> comm_trace;      // only with tracing enabled
    std::vector<std::string> map_share_records;  // serialized shared maps, with tracing

    int64_t frame_count() const;

    /// Writes ground_truth.csv, tracks.csv, alignments.csv, timings.csv plus
    /// a small meta.csv; with tracing also rounds.csv and map_shares.log.
    void write(const std::filesystem::path& dir) const;
    /// Throws LogError naming the offending table.
    static RunLog read(const std::filesystem::path& dir);
};

}  // namespace dmot
