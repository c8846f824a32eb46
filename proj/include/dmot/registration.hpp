#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmot/geometry.hpp"

namespace dmot {

/// A robot's local map of recently observed static landmarks.
struct LandmarkEntry {
    Point2 position = Point2::Zero();  // in the owner's local frame
    int64_t last_seen = 0;
};

struct LandmarkMap {
    std::vector<LandmarkEntry> entries;
    int32_t owner = -1;
    int64_t stamp = 0;

    bool empty() const { return entries.empty(); }

    /// Merge an observation into the map: the nearest entry within
    /// merge_radius is averaged toward the new position and its last_seen
    /// refreshed, otherwise a new entry is added.
    void observe(const Point2& p, int64_t frame, double merge_radius);

    /// Drop entries not seen for more than max_age frames.
    void prune(int64_t frame, int64_t max_age);

    /// Line-oriented text record: "owner stamp" then one "x y last_seen"
    /// triple per line.
    std::string serialize() const;
    static LandmarkMap parse(const std::string& text);
};

struct WeightedPair {
    Point2 a = Point2::Zero();
    Point2 b = Point2::Zero();
    double w = 1.0;
};
using WeightedPairs = std::vector<WeightedPair>;

enum class AlignmentMethod { static_landmarks, dynamic_objects };

struct AlignmentResult {
    NoisyTransform transform;
    double correction_trans_m = 0.0;
    double correction_rot_rad = 0.0;
    int pair_count = 0;
    AlignmentMethod method = AlignmentMethod::static_landmarks;
    double pre_fit_rms = 0.0;   // weighted pair misfit under the previous estimate
    double post_fit_rms = 0.0;  // and under the new one
};

struct RegistrationParams {
    double icp_reject_radius = 1.0;  // m
    int icp_max_iter = 20;
    double icp_tol = 1e-4;           // m, transform change per iteration
    double merge_radius = 0.5;       // m, landmark map merging
    double weight_max = 1e4;         // clamp for the consistency weight
    double weight_eps = 1e-6;        // residual products below this get weight 0
    // A realignment is only adopted when it explains a meaningful part of
    // the pair misfit (post-fit RMS below this fraction of the pre-fit RMS).
    double accept_improvement = 0.85;
    int accept_min_pairs = 3;
};

/// Diagonal alignment covariance scaled linearly with the latest correction.
struct AlignmentCovScale {
    double c_trans = 1.0;      // m of std dev per m of correction
    double c_rot = 1.0;        // rad of std dev per rad of correction
    double sigma_trans0 = 0.02;  // floor, m
    double sigma_rot0 = 0.01;    // floor, rad
};

/// Weighted rigid registration (least squares over T·a_k ≈ b_k) by SVD of
/// the weighted cross-covariance, with reflection correction.
/// Throws DegenerateInput for < 2 positively weighted pairs or coincident
/// source points.
Pose2 arun_weighted(const WeightedPairs& pairs);

/// 1 / ((l_i + 1)(l_j + 1)) for frames-since-last-seen counts; just-seen
/// landmarks get weight 1.
double recency_weight(int64_t l_i, int64_t l_j);

/// ICP correspondence search between two landmark maps starting from
/// `initial` (mapping map_a's frame into map_b's). Returns the converged
/// correspondences weighted by recency. Throws NoCorrespondences when every
/// pairing exceeds the rejection radius.
WeightedPairs icp_associate(const LandmarkMap& map_a, const LandmarkMap& map_b,
                            const Pose2& initial, int max_iter, double tol,
                            double reject_radius);

/// Static-landmark realignment: ICP association seeded by the previous
/// estimate, recency weighting, weighted registration. The result maps
/// map_a's frame into map_b's.
AlignmentResult align_static(const LandmarkMap& map_a, const LandmarkMap& map_b,
                             const NoisyTransform& prev, int64_t frame,
                             const RegistrationParams& params,
                             const AlignmentCovScale& scale);

/// Pair weight from how consistent both detections are with the track state:
/// 1 / ((H x̂ − z_i)ᵀ (H x̂ − z̃_j)), clamped to [0, weight_max] and zeroed
/// for degenerate residual products.
double consistency_weight(const Point2& predicted, const Point2& z_own,
                          const Point2& z_recv, const RegistrationParams& params);

/// One time-matched co-detection of a tracked object: the local measurement,
/// the neighbor's measurement already expressed in the local frame via the
/// previous alignment, and the track's predicted position.
struct CoDetection {
    Point2 predicted = Point2::Zero();
    Point2 z_own = Point2::Zero();
    Point2 z_recv = Point2::Zero();
};

/// Dynamic-object realignment: registers the received detections onto the
/// local ones and composes the correction onto the previous alignment.
/// Throws DegenerateInput when fewer than 2 pairs carry positive weight.
AlignmentResult align_dynamic(const std::vector<CoDetection>& pairs,
                              const NoisyTransform& prev, int64_t frame,
                              const RegistrationParams& params,
                              const AlignmentCovScale& scale);

/// diag((c_t·dt + σ_t0)², (c_t·dt + σ_t0)², (c_θ·dθ + σ_θ0)²) from the
/// difference between consecutive alignment estimates.
PoseCov alignment_covariance(const Pose2& current, const Pose2& previous,
                             const AlignmentCovScale& scale);

/// Re-anchor a diagonal alignment covariance so its rotation uncertainty
/// acts about the registration centroid (in the source frame) instead of
/// the source frame's origin. Keeps the point-level uncertainty at the
/// matched region equal to the translation term instead of inflating it by
/// the origin's lever arm.
PoseCov anchor_alignment_covariance(const Pose2& pose, const PoseCov& diagonal,
                                    const Point2& source_centroid);

}  // namespace dmot
