#include "dmot/sim.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <memory>

#include "dmot/errors.hpp"
#include "dmot/network.hpp"

namespace dmot {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kHeadingErrPerMeter = 8.12 * kPi / 180.0;  // rad of heading error per m

// Substream keys; one independent stream per (purpose, robot).
enum StreamKey : uint64_t { kOdomStream = 1, kDetectStream = 2, kLandmarkStream = 3, kInjectStream = 4 };

uint64_t stream_key(StreamKey purpose, int robot) {
    return static_cast<uint64_t>(purpose) * 1000003ULL + static_cast<uint64_t>(robot);
}

Point2 waypoint_position(const std::vector<Point2>& wps, double speed, double t) {
    if (wps.size() == 1 || speed <= 0.0) return wps.front();
    std::vector<double> seg_len(wps.size());
    double total = 0.0;
    for (size_t i = 0; i < wps.size(); ++i) {
        const Point2& a = wps[i];
        const Point2& b = wps[(i + 1) % wps.size()];
        seg_len[i] = (b - a).norm();
        total += seg_len[i];
    }
    if (total <= 0.0) return wps.front();
    double s = std::fmod(speed * t, total);
    for (size_t i = 0; i < wps.size(); ++i) {
        if (s <= seg_len[i] || i + 1 == wps.size()) {
            const Point2& a = wps[i];
            const Point2& b = wps[(i + 1) % wps.size()];
            const double f = seg_len[i] > 0.0 ? s / seg_len[i] : 0.0;
            return a + f * (b - a);
        }
        s -= seg_len[i];
    }
    return wps.front();
}

double waypoint_heading(const std::vector<Point2>& wps, double speed, double t) {
    if (wps.size() == 1 || speed <= 0.0) return 0.0;
    std::vector<double> seg_len(wps.size());
    double total = 0.0;
    for (size_t i = 0; i < wps.size(); ++i) {
        seg_len[i] = (wps[(i + 1) % wps.size()] - wps[i]).norm();
        total += seg_len[i];
    }
    if (total <= 0.0) return 0.0;
    double s = std::fmod(speed * t, total);
    for (size_t i = 0; i < wps.size(); ++i) {
        if (s <= seg_len[i] || i + 1 == wps.size()) {
            const Point2 d = wps[(i + 1) % wps.size()] - wps[i];
            return std::atan2(d.y(), d.x());
        }
        s -= seg_len[i];
    }
    return 0.0;
}

}  // namespace

Pose2 trajectory_pose(const RobotConfig& robot, double t) {
    if (std::holds_alternative<StaticTraj>(robot.trajectory)) {
        return robot.initial;
    }
    if (const auto* c = std::get_if<CircularTraj>(&robot.trajectory)) {
        const double phase = c->phase0 + c->angular_rate * t;
        const double heading = phase + (c->angular_rate >= 0.0 ? kPi / 2.0 : -kPi / 2.0);
        return Pose2(c->center.x() + c->radius * std::cos(phase),
                     c->center.y() + c->radius * std::sin(phase), heading);
    }
    const auto& w = std::get<WaypointTraj>(robot.trajectory);
    const Point2 p = waypoint_position(w.waypoints, w.speed, t);
    return Pose2(p.x(), p.y(), waypoint_heading(w.waypoints, w.speed, t));
}

Point2 pedestrian_position(const PedestrianConfig& ped, double t) {
    return waypoint_position(ped.waypoints, ped.speed_mps, t);
}

OdomStep step_odometry(const Pose2& true_increment, const OdomNoise& noise, Rng& rng) {
    OdomStep step;
    const bool moved = true_increment.x != 0.0 || true_increment.y != 0.0 ||
                       true_increment.theta != 0.0;
    if (!moved) {
        step.increment = true_increment;
        return step;  // zero increment accumulates no drift
    }
    step.increment = Pose2(true_increment.x + rng.gauss(noise.sigma_v),
                           true_increment.y + rng.gauss(noise.sigma_v),
                           true_increment.theta + rng.gauss(noise.sigma_omega));
    step.cov = PoseCov::Zero();
    step.cov(0, 0) = noise.sigma_v * noise.sigma_v;
    step.cov(1, 1) = noise.sigma_v * noise.sigma_v;
    step.cov(2, 2) = noise.sigma_omega * noise.sigma_omega;
    return step;
}

bool in_fov(const Pose2& sensor_world, const FovConfig& fov, const Point2& target_world) {
    const Point2 rel = transform_point(inverse(sensor_world), target_world);
    const double range = rel.norm();
    if (range > fov.range_m) return false;
    return std::abs(std::atan2(rel.y(), rel.x())) <= fov.half_angle_rad;
}

std::vector<Measurement> detect_pedestrians(const Pose2& true_world, const Pose2& est_local,
                                            const PoseCov& pose_cov, const FovConfig& fov,
                                            const std::vector<Point2>& pedestrians_world,
                                            const DetectionNoise& noise, int64_t frame,
                                            int32_t robot, Rng& rng) {
    std::vector<Measurement> out;
    const PointCov r = noise.sigma_z_m * noise.sigma_z_m * Eigen::Matrix2d::Identity();
    const Pose2 world_inv = inverse(true_world);

    for (const Point2& ped : pedestrians_world) {
        if (!in_fov(true_world, fov, ped)) continue;
        if (!rng.bernoulli(noise.p_detect)) continue;
        Point2 body = transform_point(world_inv, ped);
        body.x() += rng.gauss(noise.sigma_z_m);
        body.y() += rng.gauss(noise.sigma_z_m);
        auto [pos, cov] = propagate_into_local(est_local, pose_cov, body, r);
        out.push_back({pos, cov, frame, robot});
    }

    const int clutter = rng.poisson(noise.clutter_rate);
    for (int c = 0; c < clutter; ++c) {
        const double range = fov.range_m * std::sqrt(rng.uniform());
        const double angle = rng.uniform(-fov.half_angle_rad, fov.half_angle_rad);
        const Point2 body(range * std::cos(angle), range * std::sin(angle));
        auto [pos, cov] = propagate_into_local(est_local, pose_cov, body, r);
        out.push_back({pos, cov, frame, robot});
    }
    return out;
}

void detect_landmarks(const Pose2& true_world, const Pose2& est_local, const FovConfig& fov,
                      const std::vector<Point2>& landmarks_world, const LandmarkNoise& noise,
                      int64_t frame, double merge_radius, LandmarkMap& map, Rng& rng) {
    const Pose2 world_inv = inverse(true_world);
    for (const Point2& lm : landmarks_world) {
        if (!in_fov(true_world, fov, lm)) continue;
        if (!rng.bernoulli(noise.p_detect)) continue;
        Point2 body = transform_point(world_inv, lm);
        body.x() += rng.gauss(noise.sigma_l_m);
        body.y() += rng.gauss(noise.sigma_l_m);
        map.observe(transform_point(est_local, body), frame, merge_radius);
    }
}

Pose2 inject_alignment_error(double sigma_t_m, Rng& rng) {
    if (sigma_t_m <= 0.0) return Pose2::identity();
    const double sigma_theta = kHeadingErrPerMeter * sigma_t_m;
    const double theta = rng.gauss(sigma_theta);
    const double magnitude = std::abs(rng.gauss(sigma_t_m));
    const double direction = rng.uniform(0.0, 2.0 * kPi);
    return Pose2(magnitude * std::cos(direction), magnitude * std::sin(direction), theta);
}

RealignChoice select_realign_mode(int eta, int tau_eta, RealignMode mode, bool map_available) {
    switch (mode) {
        case RealignMode::off:
            return RealignChoice::none;
        case RealignMode::static_landmarks:
            return RealignChoice::static_landmarks;
        case RealignMode::dynamic_objects:
            return RealignChoice::dynamic_objects;
        case RealignMode::automatic:
            if (eta >= tau_eta) return RealignChoice::dynamic_objects;
            return map_available ? RealignChoice::static_landmarks : RealignChoice::none;
    }
    return RealignChoice::none;
}

namespace {

struct SimRobot {
    Pose2 world;         // true pose, world frame
    Pose2 world_prev;
    Pose2 initial_world; // the robot's local frame, fixed at t = 0
    Pose2 est_local;     // pose estimate in the local frame
    PoseCov sigma = PoseCov::Zero();
    LandmarkMap map;
    std::unique_ptr<RobotEngine> engine;
    Rng odom_rng{0}, detect_rng{0}, landmark_rng{0};
    double tracking_ms = 0.0;
    double alignment_ms = 0.0;
    bool aligned_this_frame = false;
};

double ms_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

RunLog run_scenario(const ScenarioConfig& cfg) {
    cfg.validate();

    const int n = static_cast<int>(cfg.robots.size());
    const CommGraph graph = cfg.comm_adjacency.has_value()
                                ? CommGraph::from_adjacency(*cfg.comm_adjacency)
                                : CommGraph::complete(n);
    const double dt = 1.0 / cfg.frame_rate_hz;
    const int64_t frames = cfg.total_frames();
    const MotionModel model = constant_velocity_model(dt, cfg.tracker.process_noise);

    TrackerParams tp = cfg.tracker;
    tp.eta_window = std::max(tp.eta_window, 1);
    if (cfg.realign.reactive_gate) {
        tp.loose_pairing = true;
    } else {
        tp.loose_pairing = false;
        tp.gate.alpha_trans = 0.0;
        tp.gate.alpha_rot = 0.0;
    }

    const bool use_static_realign = cfg.realign.mode == RealignMode::static_landmarks ||
                                    cfg.realign.mode == RealignMode::automatic;

    std::vector<SimRobot> bots(n);
    Rng inject_rng = Rng::substream(cfg.rng_seed, stream_key(kInjectStream, 0));
    for (int i = 0; i < n; ++i) {
        SimRobot& b = bots[i];
        b.initial_world = trajectory_pose(cfg.robots[i], 0.0);
        b.world = b.initial_world;
        b.world_prev = b.initial_world;
        b.est_local = Pose2::identity();
        if (cfg.error_injection.enabled && !cfg.ground_truth_localization) {
            b.est_local = inject_alignment_error(cfg.error_injection.sigma_t_m, inject_rng);
        }
        b.map.owner = i;
        b.engine = std::make_unique<RobotEngine>(i, model, tp, cfg.registration, cfg.alignment_cov);
        if (!cfg.ground_truth_localization) {
            PoseCov drift_rate = PoseCov::Zero();
            drift_rate(0, 0) = 2.0 * cfg.odom_noise.sigma_v * cfg.odom_noise.sigma_v;
            drift_rate(1, 1) = drift_rate(0, 0);
            drift_rate(2, 2) = 2.0 * cfg.odom_noise.sigma_omega * cfg.odom_noise.sigma_omega;
            b.engine->set_alignment_drift_rate(drift_rate);
        }
        b.odom_rng = Rng::substream(cfg.rng_seed, stream_key(kOdomStream, i));
        b.detect_rng = Rng::substream(cfg.rng_seed, stream_key(kDetectStream, i));
        b.landmark_rng = Rng::substream(cfg.rng_seed, stream_key(kLandmarkStream, i));
    }

    // Initial alignments come from the known relative start poses; the floor
    // covariance reflects that they are trusted until realignment says
    // otherwise.
    PoseCov align_cov0 = PoseCov::Zero();
    align_cov0(0, 0) = cfg.alignment_cov.sigma_trans0 * cfg.alignment_cov.sigma_trans0;
    align_cov0(1, 1) = align_cov0(0, 0);
    align_cov0(2, 2) = cfg.alignment_cov.sigma_rot0 * cfg.alignment_cov.sigma_rot0;
    for (int i = 0; i < n; ++i) {
        for (int j : graph.neighbors(i)) {
            const Pose2 t_j_to_i = compose(inverse(bots[i].initial_world), bots[j].initial_world);
            bots[i].engine->add_neighbor(j, NoisyTransform{t_j_to_i, align_cov0, 0});
        }
    }

    RunLog log;
    log.frame_rate_hz = cfg.frame_rate_hz;
    log.d_match_m = cfg.d_match_m;

    std::vector<Point2> peds(cfg.pedestrians.size());
    std::vector<std::vector<Envelope>> outboxes(n);
    std::vector<std::map<int32_t, LandmarkMap>> received_maps(n);

    for (int64_t k = 0; k < frames; ++k) {
        const double t = static_cast<double>(k) * dt;

        for (int i = 0; i < n; ++i) {
            bots[i].world_prev = bots[i].world;
            bots[i].world = trajectory_pose(cfg.robots[i], t);
            bots[i].tracking_ms = 0.0;
            bots[i].alignment_ms = 0.0;
            bots[i].aligned_this_frame = false;
        }
        for (size_t p = 0; p < cfg.pedestrians.size(); ++p) {
            peds[p] = pedestrian_position(cfg.pedestrians[p], t);
        }

        // Localization.
        for (int i = 0; i < n; ++i) {
            SimRobot& b = bots[i];
            if (cfg.ground_truth_localization) {
                b.est_local = compose(inverse(b.initial_world), b.world);
                b.sigma = PoseCov::Zero();
            } else if (k > 0) {
                const Pose2 delta = compose(inverse(b.world_prev), b.world);
                const OdomStep step = step_odometry(delta, cfg.odom_noise, b.odom_rng);
                b.sigma = compose_cov(b.est_local, b.sigma, step.increment, step.cov);
                b.est_local = compose(b.est_local, step.increment);
            }
        }

        // Perception, local association, outgoing messages.
        for (int i = 0; i < n; ++i) {
            SimRobot& b = bots[i];
            outboxes[i].clear();
            received_maps[i].clear();
            const auto t0 = std::chrono::steady_clock::now();
            if (!cfg.landmarks.empty()) {
                detect_landmarks(b.world, b.est_local, cfg.robots[i].fov, cfg.landmarks,
                                 cfg.landmark_detection, k, cfg.registration.merge_radius, b.map,
                                 b.landmark_rng);
                b.map.prune(k, cfg.realign.map_max_age_frames);
                b.map.stamp = k;
            }
            std::vector<Measurement> zs =
                detect_pedestrians(b.world, b.est_local, b.sigma, cfg.robots[i].fov, peds,
                                   cfg.detection, k, i, b.detect_rng);
            const Pose2 sensor_in_local = b.est_local;
            const FovConfig fov = cfg.robots[i].fov;
            b.engine->set_visibility([sensor_in_local, fov](const Point2& p_local) {
                const Point2 body = transform_point(inverse(sensor_in_local), p_local);
                if (body.norm() > fov.range_m) return false;
                return std::abs(std::atan2(body.y(), body.x())) <= fov.half_angle_rad;
            });
            std::vector<InfoMessage> msgs = b.engine->local_step(k, std::move(zs));
            for (auto& m : msgs) {
                outboxes[i].push_back(Envelope{i, kBroadcast, std::move(m)});
            }
            if (use_static_realign && !b.map.empty() &&
                schedule_map_shares(k, cfg.realign.map_share_hz, cfg.frame_rate_hz)) {
                outboxes[i].push_back(Envelope{i, kBroadcast, b.map});
            }
            b.tracking_ms += ms_since(t0);
        }

        const RoundMailbox mail = exchange_round(outboxes, graph);

        if (cfg.trace_comms) {
            for (int i = 0; i < n; ++i) {
                for (const Envelope& env : mail.inbox[i]) {
                    const bool is_info = std::holds_alternative<InfoMessage>(env.payload);
                    log.comm_trace.push_back({k, env.sender, i, is_info ? "info" : "map",
                                              payload_size_estimate(env.payload)});
                    if (!is_info) {
                        log.map_share_records.push_back(
                            "# frame " + std::to_string(k) + " from " +
                            std::to_string(env.sender) + " to " + std::to_string(i) + "\n" +
                            std::get<LandmarkMap>(env.payload).serialize());
                    }
                }
            }
        }

        // Fusion.
        for (int i = 0; i < n; ++i) {
            SimRobot& b = bots[i];
            const auto t0 = std::chrono::steady_clock::now();
            b.engine->ingest(k, mail.inbox[i]);
            for (const Envelope& env : mail.inbox[i]) {
                if (std::holds_alternative<LandmarkMap>(env.payload)) {
                    received_maps[i][env.sender] = std::get<LandmarkMap>(env.payload);
                }
            }
            b.engine->fuse_and_manage(k);
            b.tracking_ms += ms_since(t0);
        }

        // Frame realignment.
        std::vector<std::map<int32_t, AlignmentResult>> align_events(n);
        for (int i = 0; i < n; ++i) {
            SimRobot& b = bots[i];
            for (int j : graph.neighbors(i)) {
                const bool map_arrived = received_maps[i].contains(j);
                const RealignChoice choice = select_realign_mode(
                    b.engine->eta(j), cfg.realign.tau_eta, cfg.realign.mode, map_arrived);
                if (choice == RealignChoice::none) continue;
                const auto t0 = std::chrono::steady_clock::now();
                std::optional<AlignmentResult> result;
                if (choice == RealignChoice::static_landmarks) {
                    if (map_arrived && !b.map.empty()) {
                        result = b.engine->realign_static(k, j, b.map, received_maps[i].at(j));
                    }
                } else {
                    result = b.engine->realign_dynamic(k, j);
                }
                if (result.has_value()) {
                    align_events[i].emplace(j, *result);
                    b.aligned_this_frame = true;
                }
                b.alignment_ms += ms_since(t0);
            }
            if (b.aligned_this_frame) {
                // A fresh alignment re-references this robot's data for the
                // team; pose uncertainty re-accumulates from the alignment
                // floor until the next event.
                b.sigma = align_cov0;
            }
            b.engine->finish_frame(k);
        }

        // Logging. Stored track states are priors for the next frame; undo
        // the trailing prediction so rows carry the frame-k posterior.
        for (int i = 0; i < n; ++i) {
            const SimRobot& b = bots[i];
            log.robot_poses.push_back({k, i, b.world, b.est_local});
            for (const auto& [tid, track] : b.engine->tracks()) {
                Eigen::Vector4d posterior = track.x;
                posterior.head<2>() -= dt * track.x.tail<2>();
                log.tracks.push_back({k, i, tid, track.status == TrackStatus::confirmed ? 1 : 0,
                                      posterior, track.P.trace()});
            }
            for (int j : graph.neighbors(i)) {
                AlignRow row;
                row.frame = k;
                row.robot = i;
                row.neighbor = j;
                row.est = b.engine->alignment(j).pose;
                // True mapping from j's reported frame into i's: each side's
                // current drift composed around the fixed inter-frame offset.
                row.truth = compose(b.est_local,
                                    compose(inverse(b.world),
                                            compose(bots[j].world, inverse(bots[j].est_local))));
                const auto ev = align_events[i].find(j);
                if (ev != align_events[i].end()) {
                    row.event = ev->second.method == AlignmentMethod::static_landmarks
                                    ? AlignEvent::static_landmarks
                                    : AlignEvent::dynamic_objects;
                    row.pair_count = ev->second.pair_count;
                    row.corr_trans_m = ev->second.correction_trans_m;
                    row.corr_rot_rad = ev->second.correction_rot_rad;
                }
                log.alignments.push_back(row);
            }
            log.timings.push_back({k, i, "tracking", b.tracking_ms});
            if (b.aligned_this_frame) {
                log.timings.push_back({k, i, "alignment", b.alignment_ms});
            }
        }
        for (size_t p = 0; p < peds.size(); ++p) {
            log.objects.push_back({k, static_cast<int32_t>(p), peds[p]});
        }
    }

    return log;
}

}  // namespace dmot
