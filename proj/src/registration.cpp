#include "dmot/registration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dmot/errors.hpp"

namespace dmot {

void LandmarkMap::observe(const Point2& p, int64_t frame, double merge_radius) {
    stamp = std::max(stamp, frame);
    LandmarkEntry* nearest = nullptr;
    double best = merge_radius;
    for (auto& e : entries) {
        const double d = (e.position - p).norm();
        if (d <= best) {
            best = d;
            nearest = &e;
        }
    }
    if (nearest != nullptr) {
        nearest->position = 0.5 * (nearest->position + p);
        nearest->last_seen = frame;
    } else {
        entries.push_back({p, frame});
    }
}

void LandmarkMap::prune(int64_t frame, int64_t max_age) {
    entries.erase(std::remove_if(entries.begin(), entries.end(),
                                 [&](const LandmarkEntry& e) { return frame - e.last_seen > max_age; }),
                  entries.end());
}

std::string LandmarkMap::serialize() const {
    std::ostringstream os;
    os.precision(17);
    os << owner << " " << stamp << "\n";
    for (const auto& e : entries) {
        os << e.position.x() << " " << e.position.y() << " " << e.last_seen << "\n";
    }
    return os.str();
}

LandmarkMap LandmarkMap::parse(const std::string& text) {
    std::istringstream is(text);
    LandmarkMap map;
    if (!(is >> map.owner >> map.stamp)) {
        throw LogError("landmark map record: missing owner/stamp header");
    }
    double x = 0.0, y = 0.0;
    int64_t seen = 0;
    while (is >> x >> y >> seen) {
        map.entries.push_back({Point2(x, y), seen});
    }
    return map;
}

Pose2 arun_weighted(const WeightedPairs& pairs) {
    double wsum = 0.0;
    int positive = 0;
    Eigen::Vector2d ca = Eigen::Vector2d::Zero();
    Eigen::Vector2d cb = Eigen::Vector2d::Zero();
    for (const auto& p : pairs) {
        if (p.w <= 0.0) continue;
        ++positive;
        wsum += p.w;
        ca += p.w * p.a;
        cb += p.w * p.b;
    }
    if (positive < 2) {
        throw DegenerateInput("registration needs at least 2 positively weighted pairs");
    }
    ca /= wsum;
    cb /= wsum;

    Eigen::Matrix2d cross = Eigen::Matrix2d::Zero();
    double spread = 0.0;
    for (const auto& p : pairs) {
        if (p.w <= 0.0) continue;
        const Eigen::Vector2d da = p.a - ca;
        const Eigen::Vector2d db = p.b - cb;
        cross += p.w * da * db.transpose();
        spread += p.w * da.squaredNorm();
    }
    if (spread <= 1e-18 * wsum) {
        throw DegenerateInput("registration source points are coincident");
    }

    // R = V diag(1, det(V U^T)) U^T keeps the solution a proper rotation.
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix2d u = svd.matrixU();
    const Eigen::Matrix2d v = svd.matrixV();
    Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
    d(1, 1) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    const Eigen::Matrix2d rot = v * d * u.transpose();

    const double theta = std::atan2(rot(1, 0), rot(0, 0));
    const Eigen::Vector2d t = cb - rot * ca;
    return Pose2(t.x(), t.y(), theta);
}

double recency_weight(int64_t l_i, int64_t l_j) {
    return 1.0 / (static_cast<double>(l_i + 1) * static_cast<double>(l_j + 1));
}

WeightedPairs icp_associate(const LandmarkMap& map_a, const LandmarkMap& map_b,
                            const Pose2& initial, int max_iter, double tol,
                            double reject_radius) {
    if (map_a.empty() || map_b.empty()) {
        throw NoCorrespondences("icp: empty landmark map");
    }

    Pose2 current = initial;
    std::vector<std::pair<int, int>> matches;
    for (int iter = 0; iter < max_iter; ++iter) {
        matches.clear();
        for (int ia = 0; ia < static_cast<int>(map_a.entries.size()); ++ia) {
            const Point2 moved = transform_point(current, map_a.entries[ia].position);
            int best = -1;
            double best_d = reject_radius;
            for (int ib = 0; ib < static_cast<int>(map_b.entries.size()); ++ib) {
                const double d = (map_b.entries[ib].position - moved).norm();
                if (d <= best_d) {
                    best_d = d;
                    best = ib;
                }
            }
            if (best >= 0) matches.emplace_back(ia, best);
        }
        if (matches.size() < 2) break;

        WeightedPairs fit;
        fit.reserve(matches.size());
        for (const auto& [ia, ib] : matches) {
            fit.push_back({map_a.entries[ia].position, map_b.entries[ib].position, 1.0});
        }
        Pose2 next;
        try {
            next = arun_weighted(fit);
        } catch (const DegenerateInput&) {
            break;  // collapsed correspondences; keep the current estimate
        }
        const TransformError step = transform_error(current, next);
        current = next;
        if (step.translation_m + std::abs(step.heading_deg) * 0.0174532925199433 < tol) break;
    }

    if (matches.size() < 2) {
        throw NoCorrespondences("icp: no correspondences within the rejection radius");
    }

    WeightedPairs out;
    out.reserve(matches.size());
    for (const auto& [ia, ib] : matches) {
        const auto& ea = map_a.entries[ia];
        const auto& eb = map_b.entries[ib];
        const double w = recency_weight(map_a.stamp - ea.last_seen, map_b.stamp - eb.last_seen);
        out.push_back({ea.position, eb.position, w});
    }
    return out;
}

namespace {

// Pre/post misfit comparison over the best-fitting 70% of the weight (by
// post-fit residual), so badly matched pairs cannot mask a good correction.
std::pair<double, double> trimmed_fit_rms(const WeightedPairs& pairs, const Pose2& before,
                                          const Pose2& after) {
    struct Entry {
        double pre2, post2, w;
    };
    std::vector<Entry> entries;
    double total_w = 0.0;
    for (const auto& p : pairs) {
        if (p.w <= 0.0) continue;
        entries.push_back({(transform_point(before, p.a) - p.b).squaredNorm(),
                           (transform_point(after, p.a) - p.b).squaredNorm(), p.w});
        total_w += p.w;
    }
    if (entries.empty()) return {0.0, 0.0};
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.post2 < b.post2; });
    double pre = 0.0, post = 0.0, used = 0.0;
    for (const auto& e : entries) {
        pre += e.w * e.pre2;
        post += e.w * e.post2;
        used += e.w;
        if (used >= 0.7 * total_w) break;
    }
    return {std::sqrt(pre / used), std::sqrt(post / used)};
}

Point2 weighted_source_centroid(const WeightedPairs& pairs) {
    Point2 c = Point2::Zero();
    double wsum = 0.0;
    for (const auto& p : pairs) {
        if (p.w <= 0.0) continue;
        c += p.w * p.a;
        wsum += p.w;
    }
    return wsum > 0.0 ? Point2(c / wsum) : Point2::Zero();
}

}  // namespace

AlignmentResult align_static(const LandmarkMap& map_a, const LandmarkMap& map_b,
                             const NoisyTransform& prev, int64_t frame,
                             const RegistrationParams& params,
                             const AlignmentCovScale& scale) {
    const WeightedPairs pairs = icp_associate(map_a, map_b, prev.pose, params.icp_max_iter,
                                              params.icp_tol, params.icp_reject_radius);
    const Pose2 pose = arun_weighted(pairs);
    const TransformError correction = transform_error(pose, prev.pose);

    AlignmentResult result;
    result.transform.pose = pose;
    result.transform.cov = anchor_alignment_covariance(
        pose, alignment_covariance(pose, prev.pose, scale), weighted_source_centroid(pairs));
    result.transform.stamp = frame;
    result.correction_trans_m = correction.translation_m;
    result.correction_rot_rad = correction.heading_deg * 0.0174532925199433;
    result.pair_count = static_cast<int>(pairs.size());
    result.method = AlignmentMethod::static_landmarks;
    std::tie(result.pre_fit_rms, result.post_fit_rms) = trimmed_fit_rms(pairs, prev.pose, pose);
    return result;
}

double consistency_weight(const Point2& predicted, const Point2& z_own,
                          const Point2& z_recv, const RegistrationParams& params) {
    const Eigen::Vector2d r_own = predicted - z_own;
    const Eigen::Vector2d r_recv = predicted - z_recv;
    const double d = r_own.dot(r_recv);
    if (d <= params.weight_eps) return 0.0;
    return std::min(1.0 / d, params.weight_max);
}

AlignmentResult align_dynamic(const std::vector<CoDetection>& pairs,
                              const NoisyTransform& prev, int64_t frame,
                              const RegistrationParams& params,
                              const AlignmentCovScale& scale) {
    WeightedPairs weighted;
    weighted.reserve(pairs.size());
    for (const auto& p : pairs) {
        const double w = consistency_weight(p.predicted, p.z_own, p.z_recv, params);
        weighted.push_back({p.z_recv, p.z_own, w});
    }

    const Pose2 realign = arun_weighted(weighted);  // throws DegenerateInput when under-constrained
    const Pose2 pose = compose(realign, prev.pose);

    // The registration pinned the correction around the co-detections; the
    // anchoring centroid lives in the sender's frame.
    const Point2 centroid_local = weighted_source_centroid(weighted);
    const Point2 centroid_sender = transform_point(inverse(prev.pose), centroid_local);

    AlignmentResult result;
    result.transform.pose = pose;
    result.transform.cov = anchor_alignment_covariance(
        pose, alignment_covariance(pose, prev.pose, scale), centroid_sender);
    result.transform.stamp = frame;
    result.correction_trans_m = std::hypot(realign.x, realign.y);
    result.correction_rot_rad = std::abs(realign.theta);
    result.pair_count = static_cast<int>(weighted.size());
    result.method = AlignmentMethod::dynamic_objects;
    std::tie(result.pre_fit_rms, result.post_fit_rms) =
        trimmed_fit_rms(weighted, Pose2::identity(), realign);
    return result;
}

PoseCov anchor_alignment_covariance(const Pose2& pose, const PoseCov& diagonal,
                                    const Point2& source_centroid) {
    const double st2 = diagonal(0, 0);
    const double sr2 = diagonal(2, 2);
    const double c = std::cos(pose.theta);
    const double s = std::sin(pose.theta);
    // a = -R'(theta) * centroid, so that [I | R'(theta) z] maps the
    // covariance to st2*I + sr2 * R'(z - centroid) (R'(z - centroid))^T.
    const Eigen::Vector2d a(s * source_centroid.x() + c * source_centroid.y(),
                            -c * source_centroid.x() + s * source_centroid.y());
    PoseCov cov = PoseCov::Zero();
    cov.topLeftCorner<2, 2>() = st2 * Eigen::Matrix2d::Identity() + sr2 * a * a.transpose();
    cov.topRightCorner<2, 1>() = sr2 * a;
    cov.bottomLeftCorner<1, 2>() = sr2 * a.transpose();
    cov(2, 2) = sr2;
    return cov;
}

PoseCov alignment_covariance(const Pose2& current, const Pose2& previous,
                             const AlignmentCovScale& scale) {
    const TransformError delta = transform_error(current, previous);
    const double sig_t = scale.c_trans * delta.translation_m + scale.sigma_trans0;
    const double sig_r = scale.c_rot * delta.heading_deg * 0.0174532925199433 + scale.sigma_rot0;
    PoseCov cov = PoseCov::Zero();
    cov(0, 0) = sig_t * sig_t;
    cov(1, 1) = sig_t * sig_t;
    cov(2, 2) = sig_r * sig_r;
    return cov;
}

}  // namespace dmot
