#include "dmot/robot.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dmot/errors.hpp"

namespace dmot {

RobotEngine::RobotEngine(int32_t id, const MotionModel& model, const TrackerParams& params,
                         const RegistrationParams& reg, const AlignmentCovScale& cov_scale)
    : id_(id), model_(model), params_(params), reg_(reg), cov_scale_(cov_scale) {
    gate_.tau = params.tau_gate;
    gate_.tau_base = params.tau_gate;
}

void RobotEngine::add_neighbor(int32_t j, const NoisyTransform& initial) {
    neighbors_[j].align = initial;
}

const NoisyTransform& RobotEngine::alignment(int32_t j) const {
    return neighbors_.at(j).align;
}

void RobotEngine::set_alignment(int32_t j, const NoisyTransform& t) {
    neighbors_.at(j).align = t;
}

int RobotEngine::eta(int32_t j) const {
    const auto it = neighbors_.find(j);
    return it == neighbors_.end() ? 0 : static_cast<int>(it->second.pairs.size());
}

TrackId RobotEngine::resolve(TrackId id) const {
    for (int hops = 0; hops < 64; ++hops) {
        const auto it = alias_.find(id);
        if (it == alias_.end()) break;
        id = it->second;
    }
    return id;
}

void RobotEngine::rekey(TrackId from, TrackId to) {
    const auto it = tracks_.find(from);
    if (it == tracks_.end()) return;
    Track moved = it->second;
    moved.id = to;
    tracks_.erase(it);
    tracks_.emplace(to, std::move(moved));
    alias_[from] = to;

    const auto match = local_match_.find(from);
    if (match != local_match_.end()) {
        local_match_[to] = match->second;
        local_match_.erase(match);
    }
    const auto acc = accum_.find(from);
    if (acc != accum_.end()) {
        Accum merged = acc->second;
        accum_.erase(acc);
        Accum& dst = accum_[to];
        dst.y += merged.y;
        dst.Y += merged.Y;
        dst.any_meas = dst.any_meas || merged.any_meas;
        for (auto& p : merged.priors) dst.priors.push_back(p);
    }
}

Eigen::Vector4d RobotEngine::state_into_local(const Eigen::Vector4d& sender_state,
                                              const Pose2& align) const {
    const Point2 p = transform_point(align, Point2(sender_state(0), sender_state(1)));
    const Eigen::Vector2d v = align.rotation() * Eigen::Vector2d(sender_state(2), sender_state(3));
    return {p.x(), p.y(), v.x(), v.y()};
}

std::vector<InfoMessage> RobotEngine::local_step(int64_t frame, std::vector<Measurement> measurements) {
    frame_meas_ = std::move(measurements);
    local_match_.clear();
    unmatched_meas_.clear();
    accum_.clear();
    born_this_frame_.clear();

    // Confirmed tracks associate first; tentative tracks only compete for
    // the leftovers. A young track's inflated covariance would otherwise
    // make it the cheapest assignment for measurements a confirmed track
    // explains.
    std::vector<TrackId> confirmed_ids, tentative_ids;
    std::vector<Track> confirmed_tracks, tentative_tracks;
    for (const auto& [tid, track] : tracks_) {
        if (track.status == TrackStatus::confirmed) {
            confirmed_ids.push_back(tid);
            confirmed_tracks.push_back(track);
        } else {
            tentative_ids.push_back(tid);
            tentative_tracks.push_back(track);
        }
    }

    auto absorb = [&](const AssociationResult& assoc, const std::vector<TrackId>& ids,
                      const std::vector<Measurement>& zs, const std::vector<int>& meas_index) {
        for (const auto& [mi, ti] : assoc.matches) {
            const TrackId tid = ids[ti];
            local_match_[tid] = meas_index.empty() ? mi : meas_index[mi];
            const Measurement& z = zs[mi];
            auto [u, U] = to_information(z.pos, z.cov, model_);
            Accum& acc = accum_[tid];
            acc.y += u;
            acc.Y += U;
            acc.any_meas = true;
        }
    };

    const AssociationResult first = gnn_associate(frame_meas_, confirmed_tracks, gate_, model_);
    absorb(first, confirmed_ids, frame_meas_, {});

    std::vector<Measurement> leftovers;
    std::vector<int> leftover_index;
    for (int mi : first.unmatched_measurements) {
        leftovers.push_back(frame_meas_[mi]);
        leftover_index.push_back(mi);
    }
    const AssociationResult second = gnn_associate(leftovers, tentative_tracks, gate_, model_);
    absorb(second, tentative_ids, leftovers, leftover_index);

    // Only measurements outside every track's gate seed new tracks; an
    // unmatched measurement whose track lost the assignment race must not
    // spawn a duplicate.
    unmatched_meas_.clear();
    for (int li : second.unmatched_measurements) {
        const Measurement& z = leftovers[li];
        bool near_track = false;
        for (const auto& [tid, track] : tracks_) {
            if (mahalanobis(z, track, model_) <= gate_.tau) {
                near_track = true;
                break;
            }
        }
        if (!near_track) unmatched_meas_.push_back(leftover_index[li]);
    }

    std::vector<InfoMessage> outbox;
    for (const auto& [tid, track] : tracks_) {
        if (track.status != TrackStatus::confirmed) continue;
        InfoMessage msg;
        msg.track_id = tid;
        msg.prior = track.x;
        msg.sender = id_;
        msg.stamp = frame;
        const auto match = local_match_.find(tid);
        if (match != local_match_.end()) {
            const Measurement& z = frame_meas_[match->second];
            std::tie(msg.u, msg.U) = to_information(z.pos, z.cov, model_);
        }
        outbox.push_back(std::move(msg));
    }
    return outbox;
}

void RobotEngine::record_pairs(int64_t frame, const std::vector<PendingPair>& pending) {
    // Canonical pairs first: the same track id measured on both sides.
    std::map<int32_t, std::set<TrackId>> canonically_paired;
    std::vector<const PendingPair*> unexplained;
    for (const auto& p : pending) {
        const auto match = local_match_.find(p.tid);
        if (match != local_match_.end() && tracks_.contains(p.tid)) {
            const Track& track = tracks_.at(p.tid);
            neighbors_.at(p.sender).pairs.push_back(
                {frame, model_.H * track.x, frame_meas_[match->second].pos, p.recv_raw});
            canonically_paired[p.sender].insert(p.tid);
        } else {
            unexplained.push_back(&p);
        }
    }
    if (!params_.loose_pairing) return;

    // A detection with no local measurement for its id, landing inside the
    // region this robot can see, may be a misaligned duplicate of a track we
    // do measure. Frame error offsets positions but barely touches
    // velocities, so demand velocity agreement, and never borrow a track
    // that this sender already explained canonically.
    for (const PendingPair* p : unexplained) {
        if (visibility_ && !visibility_(p->recv_local)) continue;
        const Eigen::Vector2d v_recv = p->prior_local.tail<2>();
        const auto& used = canonically_paired[p->sender];
        double best = params_.loose_pair_radius;
        const Track* best_track = nullptr;
        int best_meas = -1;
        for (const auto& [ltid, mi] : local_match_) {
            if (used.contains(ltid)) continue;
            const Track& track = tracks_.at(ltid);
            if ((Eigen::Vector2d(track.x.tail<2>()) - v_recv).norm() >
                params_.loose_pair_vel_tol) {
                continue;
            }
            const double d = (Point2(model_.H * track.x) - p->recv_local).norm();
            if (d <= best) {
                best = d;
                best_track = &track;
                best_meas = mi;
            }
        }
        if (best_track != nullptr) {
            neighbors_.at(p->sender).pairs.push_back(
                {frame, model_.H * best_track->x, frame_meas_[best_meas].pos, p->recv_raw});
        }
    }
}

void RobotEngine::adopt_track(const InfoMessage& msg, const Eigen::Vector4d& local_prior,
                              const std::optional<std::pair<Point2, PointCov>>& local_meas) {
    Track t;
    t.id = msg.track_id;
    t.x = local_prior;
    t.P = Eigen::Matrix4d::Zero();
    if (local_meas.has_value()) {
        t.P.topLeftCorner<2, 2>() = local_meas->second;
    } else {
        t.P.topLeftCorner<2, 2>() = 0.04 * Eigen::Matrix2d::Identity();
    }
    t.P.bottomRightCorner<2, 2>() = params_.v_max * params_.v_max * Eigen::Matrix2d::Identity();
    t.hits = 1;
    t.status = TrackStatus::confirmed;  // the sender only broadcasts confirmed tracks
    tracks_.emplace(t.id, std::move(t));
    born_this_frame_.insert(msg.track_id);
    stats_.adopted += 1;
}

void RobotEngine::ingest(int64_t frame, const std::vector<Envelope>& inbox) {
    std::vector<PendingPair> pending;
    for (const Envelope& env : inbox) {
        if (!std::holds_alternative<InfoMessage>(env.payload)) continue;
        const InfoMessage& msg = std::get<InfoMessage>(env.payload);
        const auto nb = neighbors_.find(msg.sender);
        if (nb == neighbors_.end()) continue;
        const NoisyTransform& align = nb->second.align;
        NoisyTransform honest = align;
        if (frame > align.stamp) {
            honest.cov += static_cast<double>(frame - align.stamp) * alignment_drift_rate_;
        }

        // Association decisions always see the honest uncertainty; the
        // use_alignment_cov switch only controls whether it enters the
        // exchanged covariance that the fusion weighs.
        const bool has_meas = msg.U.norm() > 0.0;
        std::optional<std::pair<Point2, PointCov>> meas_local;
        PointCov fusion_cov = PointCov::Identity();
        Point2 recv_raw = Point2::Zero();
        if (has_meas) {
            auto [z_raw, r_raw] = measurement_from_information(msg.u, msg.U, model_);
            recv_raw = z_raw;
            meas_local = propagate_into_neighbor(honest, z_raw, r_raw);
            if (params_.use_alignment_cov) {
                fusion_cov = meas_local->second;
            } else {
                NoisyTransform pose_only = align;
                pose_only.cov = PoseCov::Zero();
                fusion_cov = propagate_into_neighbor(pose_only, z_raw, r_raw).second;
            }
        }
        const Eigen::Vector4d prior_local = state_into_local(msg.prior, align.pose);

        TrackId tid = resolve(msg.track_id);
        if (tracks_.contains(tid) && has_meas) {
            // Re-validate the binding: an incoming stream that persistently
            // lands outside its track's gate is routed wrongly (or the
            // frames have drifted apart). Stop fusing it, and once it has
            // struck out, forget the alias so the id can re-associate.
            Measurement probe{meas_local->first, meas_local->second, frame, msg.sender};
            const double d = mahalanobis(probe, tracks_.at(tid), model_);
            if (d <= params_.adopt_gate_scale * gate_.tau) {
                strikes_.erase(msg.track_id);
            } else {
                int& s = strikes_[msg.track_id];
                s += 1;
                if (s >= params_.n_unbind) {
                    strikes_.erase(msg.track_id);
                    if (alias_.contains(msg.track_id)) {
                        // A foreign id was bound to the wrong local track;
                        // forget the binding and let it re-associate below.
                        alias_.erase(msg.track_id);
                        stats_.unbound += 1;
                        tid = msg.track_id;
                    } else {
                        // Our copy of the sender's own track has diverged
                        // from its stream; re-sync it in place rather than
                        // starving it into a delete/re-adopt cycle.
                        Track& t = tracks_.at(tid);
                        t.x = prior_local;
                        t.P = Eigen::Matrix4d::Zero();
                        t.P.topLeftCorner<2, 2>() = meas_local->second;
                        t.P.bottomRightCorner<2, 2>() =
                            params_.v_max * params_.v_max * Eigen::Matrix2d::Identity();
                        t.missed = 0;
                        born_this_frame_.insert(tid);
                        stats_.unbound += 1;
                        pending.push_back(
                            {msg.sender, tid, recv_raw, meas_local->first, prior_local});
                        continue;
                    }
                } else {
                    stats_.quarantined += 1;
                    // Quarantine the measurement, but keep the consensus
                    // pull: the sender's prior is what lets a lagging copy
                    // reconverge instead of starving.
                    if (!born_this_frame_.contains(tid)) {
                        accum_[tid].priors.push_back(prior_local);
                    }
                    pending.push_back({msg.sender, tid, recv_raw, meas_local->first, prior_local});
                    continue;
                }
            }
        }
        if (!tracks_.contains(tid)) {
            // Unknown id: try to associate it with an existing track, else
            // adopt it as a new one.
            const Point2 pos = meas_local ? meas_local->first : Point2(prior_local(0), prior_local(1));
            const PointCov cov = meas_local ? meas_local->second
                                            : PointCov(0.04 * Eigen::Matrix2d::Identity());
            Measurement probe{pos, cov, frame, msg.sender};
            double best = params_.adopt_gate_scale * gate_.tau;
            TrackId best_id;
            bool found = false;
            for (const auto& [ltid, track] : tracks_) {
                // Only confirmed tracks can absorb a foreign id; a coasting
                // tentative track's covariance makes it an alias magnet.
                if (track.status != TrackStatus::confirmed) continue;
                const double d = mahalanobis(probe, track, model_);
                if (d <= best) {
                    best = d;
                    best_id = ltid;
                    found = true;
                }
            }
            if (found) {
                const TrackId kept = std::min(msg.track_id, best_id);
                if (kept != best_id) {
                    rekey(best_id, kept);
                } else {
                    alias_[msg.track_id] = kept;
                }
                Track& track = tracks_.at(kept);
                track.status = TrackStatus::confirmed;
                stats_.aliased += 1;
                tid = kept;
            } else {
                adopt_track(msg, prior_local, meas_local);
                tid = msg.track_id;
            }
        }

        if (!born_this_frame_.contains(tid)) {
            Accum& acc = accum_[tid];
            if (has_meas) {
                auto [u, U] = to_information(meas_local->first, fusion_cov, model_);
                acc.y += u;
                acc.Y += U;
                acc.any_meas = true;
            }
            acc.priors.push_back(prior_local);
        }
        if (has_meas) {
            pending.push_back({msg.sender, tid, recv_raw,
                               meas_local ? meas_local->first : Point2::Zero(), prior_local});
        }
    }
    record_pairs(frame, pending);
}

void RobotEngine::spawn_track(const Measurement& z) {
    Track t;
    t.id = TrackId{id_, next_seq_++};
    t.x << z.pos.x(), z.pos.y(), 0.0, 0.0;
    t.P = Eigen::Matrix4d::Zero();
    t.P.topLeftCorner<2, 2>() = z.cov;
    t.P.bottomRightCorner<2, 2>() = params_.v_max * params_.v_max * Eigen::Matrix2d::Identity();
    t.hits = 1;
    t.status = TrackStatus::tentative;
    tracks_.emplace(t.id, std::move(t));
    stats_.spawned += 1;
}

void RobotEngine::consolidate_duplicates() {
    std::vector<TrackId> confirmed;
    for (const auto& [tid, track] : tracks_) {
        if (track.status == TrackStatus::confirmed) confirmed.push_back(tid);
    }
    std::set<std::pair<TrackId, TrackId>> close_now;
    for (size_t a = 0; a < confirmed.size(); ++a) {
        for (size_t b = a + 1; b < confirmed.size(); ++b) {
            const Track& ta = tracks_.at(confirmed[a]);
            const Track& tb = tracks_.at(confirmed[b]);
            const double d = (model_.H * ta.x - model_.H * tb.x).norm();
            if (d <= params_.dup_radius) close_now.insert({confirmed[a], confirmed[b]});
        }
    }
    for (auto it = dup_counter_.begin(); it != dup_counter_.end();) {
        if (!close_now.contains(it->first)) {
            it = dup_counter_.erase(it);
        } else {
            ++it;
        }
    }
    std::vector<std::pair<TrackId, TrackId>> merges;
    for (const auto& pair : close_now) {
        int& count = dup_counter_[pair];
        count += 1;
        if (count >= params_.dup_frames) merges.push_back(pair);
    }
    for (const auto& [keep, drop] : merges) {
        if (!tracks_.contains(keep) || !tracks_.contains(drop)) continue;
        Track& kept = tracks_.at(keep);
        const Track& dropped = tracks_.at(drop);
        if (dropped.P.trace() < kept.P.trace()) {
            kept.x = dropped.x;
            kept.P = dropped.P;
        }
        kept.hits = std::max(kept.hits, dropped.hits);
        kept.missed = std::min(kept.missed, dropped.missed);
        kept.lifetime = std::max(kept.lifetime, dropped.lifetime);
        tracks_.erase(drop);
        alias_[drop] = keep;
        stats_.merged += 1;
        dup_counter_.erase({keep, drop});
    }
}

void RobotEngine::fuse_and_manage(int64_t frame) {
    (void)frame;
    static const Accum kEmpty{};
    for (auto& [tid, track] : tracks_) {
        if (born_this_frame_.contains(tid)) {
            predict(track, model_);
            continue;
        }
        const auto it = accum_.find(tid);
        const Accum& acc = it == accum_.end() ? kEmpty : it->second;
        kcf_update(track, acc.y, acc.Y, acc.priors, model_, params_.consensus_gain_cap);
        if (acc.any_meas) {
            track.hits += 1;
            if (track.status == TrackStatus::tentative && track.hits >= params_.n_confirm) {
                track.status = TrackStatus::confirmed;
                stats_.confirmed += 1;
            }
        } else if (track.status == TrackStatus::tentative) {
            // Confirmation requires an unbroken run of detections; a gap
            // restarts the count so sporadic clutter grabs never confirm.
            track.hits = 0;
        }
    }

    for (auto it = tracks_.begin(); it != tracks_.end();) {
        if (it->second.missed > params_.n_miss_max) {
            const TrackId dead = it->first;
            it = tracks_.erase(it);
            stats_.deleted += 1;
            for (auto al = alias_.begin(); al != alias_.end();) {
                if (al->second == dead) {
                    al = alias_.erase(al);
                } else {
                    ++al;
                }
            }
        } else {
            ++it;
        }
    }

    consolidate_duplicates();

    for (int mi : unmatched_meas_) {
        spawn_track(frame_meas_[mi]);
        predict(tracks_.at(TrackId{id_, next_seq_ - 1}), model_);
    }
}

std::optional<AlignmentResult> RobotEngine::realign_static(int64_t frame, int32_t j,
                                                           const LandmarkMap& own_map,
                                                           const LandmarkMap& neighbor_map) {
    NeighborState& nb = neighbors_.at(j);
    try {
        // The estimated transform maps the neighbor's frame into ours, so the
        // neighbor's map is the source point set.
        AlignmentResult result =
            align_static(neighbor_map, own_map, nb.align, frame, reg_, cov_scale_);
        nb.align = result.transform;
        note_correction(result.correction_trans_m, result.correction_rot_rad);
        return result;
    } catch (const NoCorrespondences&) {
        return std::nullopt;
    } catch (const DegenerateInput&) {
        return std::nullopt;
    }
}

std::optional<AlignmentResult> RobotEngine::realign_dynamic(int64_t frame, int32_t j) {
    NeighborState& nb = neighbors_.at(j);
    std::vector<CoDetection> pairs;
    pairs.reserve(nb.pairs.size());
    for (const PairObs& obs : nb.pairs) {
        pairs.push_back({obs.predicted, obs.z_own, transform_point(nb.align.pose, obs.recv_raw)});
    }
    try {
        AlignmentResult result = align_dynamic(pairs, nb.align, frame, reg_, cov_scale_);
        if (result.pair_count < reg_.accept_min_pairs ||
            result.post_fit_rms > reg_.accept_improvement * result.pre_fit_rms) {
            return std::nullopt;  // does not explain the misfit; keep the estimate
        }
        nb.align = result.transform;
        note_correction(result.correction_trans_m, result.correction_rot_rad);
        return result;
    } catch (const DegenerateInput&) {
        return std::nullopt;
    }
}

void RobotEngine::note_correction(double trans_m, double rot_rad) {
    frame_corr_trans_ = std::max(frame_corr_trans_, trans_m);
    frame_corr_rot_ = std::max(frame_corr_rot_, rot_rad);
}

void RobotEngine::finish_frame(int64_t frame) {
    gate_ = adapt_gate(gate_, frame_corr_trans_, frame_corr_rot_, params_.gate);
    frame_corr_trans_ = 0.0;
    frame_corr_rot_ = 0.0;
    for (auto& [j, nb] : neighbors_) {
        while (!nb.pairs.empty() && frame - nb.pairs.front().frame >= params_.eta_window) {
            nb.pairs.pop_front();
        }
    }
}

}  // namespace dmot
