#include "dmot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "dmot/errors.hpp"
#include "dmot/hungarian.hpp"

namespace dmot {

namespace {
constexpr double kFarSentinel = 1e9;

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 0) {
        const double lo = *std::max_element(v.begin(), v.begin() + mid);
        return 0.5 * (lo + hi);
    }
    return hi;
}

std::vector<HistBin> histogram(const std::vector<double>& values, double width) {
    std::vector<HistBin> bins;
    if (values.empty()) return bins;
    const double maxv = *std::max_element(values.begin(), values.end());
    const int count = std::max(1, static_cast<int>(std::ceil((maxv + 1e-12) / width)));
    bins.resize(count);
    for (int b = 0; b < count; ++b) {
        bins[b].lo = b * width;
        bins[b].hi = (b + 1) * width;
    }
    for (double v : values) {
        int b = static_cast<int>(v / width);
        b = std::clamp(b, 0, count - 1);
        bins[b].count += 1;
    }
    return bins;
}

}  // namespace

FrameEval eval_frame(const std::vector<std::pair<int32_t, Point2>>& gt,
                     const std::vector<std::pair<TrackId, Point2>>& tracks,
                     MatchState& state, double d_match) {
    FrameEval out;
    out.gt_count = static_cast<int>(gt.size());

    std::map<int32_t, const Point2*> gt_pos;
    for (const auto& [id, p] : gt) gt_pos[id] = &p;
    std::map<TrackId, const Point2*> track_pos;
    for (const auto& [id, p] : tracks) track_pos[id] = &p;

    // Carry over previous matches that are still close enough.
    std::map<int32_t, TrackId> matches;
    for (const auto& [gid, tid] : state.matches) {
        const auto g = gt_pos.find(gid);
        const auto t = track_pos.find(tid);
        if (g == gt_pos.end() || t == track_pos.end()) continue;
        if ((*g->second - *t->second).norm() <= d_match) matches[gid] = tid;
    }

    std::vector<int32_t> free_gt;
    for (const auto& [id, p] : gt) {
        if (!matches.contains(id)) free_gt.push_back(id);
    }
    std::set<TrackId> used;
    for (const auto& [gid, tid] : matches) used.insert(tid);
    std::vector<TrackId> free_tracks;
    for (const auto& [id, p] : tracks) {
        if (!used.contains(id)) free_tracks.push_back(id);
    }

    if (!free_gt.empty() && !free_tracks.empty()) {
        Eigen::MatrixXd cost(free_gt.size(), free_tracks.size());
        for (size_t i = 0; i < free_gt.size(); ++i) {
            for (size_t j = 0; j < free_tracks.size(); ++j) {
                const double d = (*gt_pos[free_gt[i]] - *track_pos[free_tracks[j]]).norm();
                cost(i, j) = d <= d_match ? d : kFarSentinel;
            }
        }
        const std::vector<int> assign = solve_assignment(cost);
        for (size_t i = 0; i < free_gt.size(); ++i) {
            const int j = assign[i];
            if (j >= 0 && cost(i, j) < kFarSentinel) matches[free_gt[i]] = free_tracks[j];
        }
    }

    for (const auto& [gid, tid] : matches) {
        const auto last = state.last_match.find(gid);
        if (last != state.last_match.end() && last->second != tid) out.mismatches += 1;
        state.last_match[gid] = tid;
    }

    out.misses = static_cast<int>(gt.size() - matches.size());
    out.false_positives = static_cast<int>(tracks.size() - matches.size());
    out.matches = matches;
    state.matches = std::move(matches);
    return out;
}

double mota(const MotAccumulator& acc) {
    int64_t errors = 0;
    int64_t gt = 0;
    for (const auto& f : acc.frames) {
        errors += f.misses + f.false_positives + f.mismatches;
        gt += f.gt_count;
    }
    if (gt == 0) throw EmptyGroundTruth("no ground-truth objects in any frame");
    return 1.0 - static_cast<double>(errors) / static_cast<double>(gt);
}

std::vector<double> sliding_mota(const MotAccumulator& acc, double window_s, double frame_rate_hz) {
    const int64_t total = static_cast<int64_t>(acc.frames.size());
    int64_t window = static_cast<int64_t>(std::llround(window_s * frame_rate_hz));
    window = std::clamp<int64_t>(window, 1, total);

    std::vector<double> series;
    series.reserve(total - window + 1);
    int64_t errors = 0;
    int64_t gt = 0;
    for (int64_t k = 0; k < total; ++k) {
        const auto& f = acc.frames[k];
        errors += f.misses + f.false_positives + f.mismatches;
        gt += f.gt_count;
        if (k >= window) {
            const auto& old = acc.frames[k - window];
            errors -= old.misses + old.false_positives + old.mismatches;
            gt -= old.gt_count;
        }
        if (k >= window - 1) {
            series.push_back(gt > 0 ? 1.0 - static_cast<double>(errors) / static_cast<double>(gt)
                                    : std::numeric_limits<double>::quiet_NaN());
        }
    }
    return series;
}

AlignmentStats alignment_stats(const RunLog& run) {
    AlignmentStats stats;
    std::vector<double> trans;
    std::vector<double> heading;
    trans.reserve(run.alignments.size());
    heading.reserve(run.alignments.size());
    for (const auto& a : run.alignments) {
        const TransformError e = transform_error(a.est, a.truth);
        trans.push_back(e.translation_m);
        heading.push_back(e.heading_deg);
    }
    stats.samples = static_cast<int64_t>(trans.size());
    stats.median_translation_m = median(trans);
    stats.median_heading_deg = median(heading);
    stats.translation_hist = histogram(trans, 0.05);
    stats.heading_hist = histogram(heading, 0.5);
    return stats;
}

EvalReport evaluate_runlog(const RunLog& log, double d_match) {
    EvalReport report;

    const int64_t frames = log.frame_count();
    int32_t n_robots = 0;
    for (const auto& r : log.robot_poses) n_robots = std::max(n_robots, r.robot + 1);

    // Mapping from each robot's reported frame into the ground-truth world
    // frame: true world pose composed with the inverse pose estimate.
    std::vector<std::vector<Pose2>> eval_map(frames, std::vector<Pose2>(n_robots));
    for (const auto& r : log.robot_poses) {
        eval_map[r.frame][r.robot] = compose(r.true_world, inverse(r.est_local));
    }

    std::vector<std::vector<std::pair<int32_t, Point2>>> gt(frames);
    for (const auto& o : log.objects) {
        gt[o.frame].emplace_back(o.object, o.pos);
    }

    // Confirmed tracks in the evaluation frame, grouped per frame.
    struct EvalTrack {
        TrackId id;
        int32_t robot;
        Point2 pos;
        double trace_p;
    };
    std::vector<std::vector<EvalTrack>> confirmed(frames);
    for (const auto& t : log.tracks) {
        if (t.status != 1) continue;
        const Point2 local(t.x(0), t.x(1));
        confirmed[t.frame].push_back(
            {t.id, t.robot, transform_point(eval_map[t.frame][t.robot], local), t.trace_p});
    }

    // Merged team evaluation: one representative per track id (the
    // best-informed holder's copy); duplicate ids of one object become false
    // positives through the one-match-per-gt rule.
    MotAccumulator merged;
    merged.d_match = d_match;
    MatchState merged_state;
    std::vector<MotAccumulator> per_robot(n_robots);
    std::vector<MatchState> robot_state(n_robots);
    for (auto& acc : per_robot) acc.d_match = d_match;

    for (int64_t k = 0; k < frames; ++k) {
        std::map<TrackId, const EvalTrack*> groups;
        for (const auto& t : confirmed[k]) {
            auto [it, inserted] = groups.try_emplace(t.id, &t);
            if (!inserted && t.trace_p < it->second->trace_p) it->second = &t;
        }
        std::vector<std::pair<TrackId, Point2>> team;
        team.reserve(groups.size());
        for (const auto& [id, g] : groups) {
            team.emplace_back(id, g->pos);
        }
        merged.frames.push_back(eval_frame(gt[k], team, merged_state, d_match));

        for (int32_t r = 0; r < n_robots; ++r) {
            std::vector<std::pair<TrackId, Point2>> own;
            for (const auto& t : confirmed[k]) {
                if (t.robot == r) own.emplace_back(t.id, t.pos);
            }
            per_robot[r].frames.push_back(eval_frame(gt[k], own, robot_state[r], d_match));
        }
    }

    report.mota_merged = mota(merged);
    for (const auto& f : merged.frames) {
        report.misses += f.misses;
        report.false_positives += f.false_positives;
        report.mismatches += f.mismatches;
        report.gt_total += f.gt_count;
    }
    double sum = 0.0;
    for (int32_t r = 0; r < n_robots; ++r) {
        report.per_robot_mota.push_back(mota(per_robot[r]));
        sum += report.per_robot_mota.back();
    }
    report.mota_per_robot_mean = n_robots > 0 ? sum / n_robots : 0.0;
    report.alignment = alignment_stats(log);
    report.merged = std::move(merged);
    return report;
}

}  // namespace dmot
