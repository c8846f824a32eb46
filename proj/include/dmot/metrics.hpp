#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "dmot/geometry.hpp"
#include "dmot/runlog.hpp"
#include "dmot/tracking.hpp"

namespace dmot {

struct FrameEval {
    int misses = 0;
    int false_positives = 0;
    int mismatches = 0;
    int gt_count = 0;
    std::map<int32_t, TrackId> matches;  // gt id -> track id, carried to the next frame
};

struct MotAccumulator {
    std::vector<FrameEval> frames;
    double d_match = 1.0;
};

/// Match bookkeeping across frames: the live matches plus the last known
/// track id per ground-truth object (persists across unmatched gaps, so a
/// re-acquisition under a new id counts as a mismatch).
struct MatchState {
    std::map<int32_t, TrackId> matches;
    std::map<int32_t, TrackId> last_match;
};

/// One frame of CLEAR-MOT bookkeeping: carry over matches still within
/// d_match, optimally assign the rest, then count misses, false positives
/// and id mismatches.
FrameEval eval_frame(const std::vector<std::pair<int32_t, Point2>>& gt,
                     const std::vector<std::pair<TrackId, Point2>>& tracks,
                     MatchState& state, double d_match);

/// 1 - sum(m + fp + mme) / sum(g). Throws EmptyGroundTruth when no ground
/// truth was ever visible.
double mota(const MotAccumulator& acc);

/// Windowed MOTA series, stepped one frame at a time; windows with no ground
/// truth yield NaN.
std::vector<double> sliding_mota(const MotAccumulator& acc, double window_s, double frame_rate_hz);

struct HistBin {
    double lo = 0.0;
    double hi = 0.0;
    int64_t count = 0;
};

struct AlignmentStats {
    double median_translation_m = 0.0;
    double median_heading_deg = 0.0;
    std::vector<HistBin> translation_hist;  // 0.05 m bins
    std::vector<HistBin> heading_hist;      // 0.5 deg bins
    int64_t samples = 0;
};

/// Per-pair, per-frame error between estimated and true frame alignments.
AlignmentStats alignment_stats(const RunLog& run);

struct EvalReport {
    double mota_merged = 0.0;
    double mota_per_robot_mean = 0.0;
    std::vector<double> per_robot_mota;
    int64_t misses = 0;
    int64_t false_positives = 0;
    int64_t mismatches = 0;
    int64_t gt_total = 0;
    AlignmentStats alignment;
    MotAccumulator merged;  // kept for windowed queries
};

/// Full evaluation of a run: the team's merged confirmed tracks (duplicates
/// of one object count as false positives) and the per-robot average, both
/// in the ground-truth frame via each robot's true pose error.
EvalReport evaluate_runlog(const RunLog& log, double d_match);

}  // namespace dmot
