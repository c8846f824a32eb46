#include <doctest.h>

#include "dmot/network.hpp"
#include "dmot/robot.hpp"
#include "oracles.hpp"

using namespace dmot;

namespace {

TrackerParams quiet_params() {
    TrackerParams p;
    p.n_confirm = 3;
    p.n_miss_max = 10;
    p.tau_gate = 9.0;
    p.gate.alpha_trans = 0.0;
    p.gate.alpha_rot = 0.0;
    return p;
}

Measurement meas(double x, double y, int64_t frame, int32_t source) {
    return {Point2(x, y), 0.01 * PointCov::Identity(), frame, source};
}

void run_frame(RobotEngine& a, RobotEngine& b, const CommGraph& g, int64_t k,
               const std::vector<Measurement>& za, const std::vector<Measurement>& zb) {
    std::vector<std::vector<Envelope>> outboxes(2);
    for (auto& m : a.local_step(k, za)) outboxes[0].push_back({0, kBroadcast, m});
    for (auto& m : b.local_step(k, zb)) outboxes[1].push_back({1, kBroadcast, m});
    const RoundMailbox mail = exchange_round(outboxes, g);
    a.ingest(k, mail.inbox[0]);
    b.ingest(k, mail.inbox[1]);
    a.fuse_and_manage(k);
    b.fuse_and_manage(k);
    a.finish_frame(k);
    b.finish_frame(k);
}

}  // namespace

TEST_CASE("a persistently observed object yields exactly one confirmed track") {
    const MotionModel m = constant_velocity_model(0.1, 0.5);
    RobotEngine engine(0, m, quiet_params(), {}, {});
    for (int64_t k = 0; k < 10; ++k) {
        engine.local_step(k, {meas(2.0, 3.0, k, 0)});
        engine.ingest(k, {});
        engine.fuse_and_manage(k);
        engine.finish_frame(k);
    }
    REQUIRE(engine.tracks().size() == 1);
    const Track& t = engine.tracks().begin()->second;
    CHECK(t.status == TrackStatus::confirmed);
    CHECK(t.x(0) == doctest::Approx(2.0).epsilon(0.01));
    CHECK(t.x(1) == doctest::Approx(3.0).epsilon(0.01));
}

TEST_CASE("single-frame clutter spawns a tentative track that dies unconfirmed") {
    const MotionModel m = constant_velocity_model(0.1, 0.5);
    TrackerParams params = quiet_params();
    RobotEngine engine(0, m, params, {}, {});

    engine.local_step(0, {meas(5.0, 5.0, 0, 0)});
    engine.ingest(0, {});
    engine.fuse_and_manage(0);
    engine.finish_frame(0);
    REQUIRE(engine.tracks().size() == 1);
    CHECK(engine.tracks().begin()->second.status == TrackStatus::tentative);

    for (int64_t k = 1; k <= params.n_miss_max + 1; ++k) {
        engine.local_step(k, {});
        engine.ingest(k, {});
        engine.fuse_and_manage(k);
        engine.finish_frame(k);
        for (const auto& [id, t] : engine.tracks()) {
            CHECK(t.status == TrackStatus::tentative);
        }
    }
    CHECK(engine.tracks().empty());
}

TEST_CASE("two robots converge to the lexicographically smallest track id") {
    const MotionModel m = constant_velocity_model(0.1, 0.5);
    const CommGraph g = CommGraph::complete(2);
    RobotEngine a(0, m, quiet_params(), {}, {});
    RobotEngine b(1, m, quiet_params(), {}, {});
    const NoisyTransform ident{Pose2::identity(), PoseCov::Zero(), 0};
    a.add_neighbor(1, ident);
    b.add_neighbor(0, ident);

    // Both robots see the same object in a shared frame.
    for (int64_t k = 0; k < 12; ++k) {
        const double x = 1.0 + 0.05 * k;
        run_frame(a, b, g, k, {meas(x, 2.0, k, 0)}, {meas(x, 2.0, k, 1)});
    }

    REQUIRE(a.tracks().size() == 1);
    REQUIRE(b.tracks().size() == 1);
    const TrackId ida = a.tracks().begin()->first;
    const TrackId idb = b.tracks().begin()->first;
    CHECK(ida == idb);
    CHECK(ida.robot == 0);  // robot 0's id is lexicographically smallest
    CHECK(a.tracks().begin()->second.status == TrackStatus::confirmed);
    CHECK(b.tracks().begin()->second.status == TrackStatus::confirmed);
}

TEST_CASE("three robots on a line agree on ids within graph-diameter rounds") {
    const MotionModel m = constant_velocity_model(0.1, 0.5);
    std::vector<std::vector<uint8_t>> adj = {{0, 1, 0}, {1, 0, 1}, {0, 1, 0}};
    const CommGraph g = CommGraph::from_adjacency(adj);
    std::vector<RobotEngine> robots;
    for (int i = 0; i < 3; ++i) robots.emplace_back(i, m, quiet_params(), RegistrationParams{},
                                                    AlignmentCovScale{});
    const NoisyTransform ident{Pose2::identity(), PoseCov::Zero(), 0};
    for (int i = 0; i < 3; ++i) {
        for (int j : g.neighbors(i)) robots[i].add_neighbor(j, ident);
    }

    for (int64_t k = 0; k < 20; ++k) {
        std::vector<std::vector<Envelope>> outboxes(3);
        for (int i = 0; i < 3; ++i) {
            const double x = 3.0 + 0.04 * k;
            for (auto& msg : robots[i].local_step(k, {meas(x, 1.0, k, i)})) {
                outboxes[i].push_back({i, kBroadcast, msg});
            }
        }
        const RoundMailbox mail = exchange_round(outboxes, g);
        for (int i = 0; i < 3; ++i) robots[i].ingest(k, mail.inbox[i]);
        for (int i = 0; i < 3; ++i) robots[i].fuse_and_manage(k);
        for (int i = 0; i < 3; ++i) robots[i].finish_frame(k);
    }

    for (int i = 0; i < 3; ++i) {
        REQUIRE(robots[i].tracks().size() == 1);
        const TrackId id = robots[i].tracks().begin()->first;
        CHECK(id.robot == 0);
    }
}

TEST_CASE("eta counts recent co-detections within the window") {
    const MotionModel m = constant_velocity_model(0.1, 0.5);
    const CommGraph g = CommGraph::complete(2);
    TrackerParams params = quiet_params();
    params.eta_window = 5;
    RobotEngine a(0, m, params, {}, {});
    RobotEngine b(1, m, params, {}, {});
    const NoisyTransform ident{Pose2::identity(), PoseCov::Zero(), 0};
    a.add_neighbor(1, ident);
    b.add_neighbor(0, ident);

    for (int64_t k = 0; k < 12; ++k) {
        run_frame(a, b, g, k, {meas(1.0, 1.0, k, 0)}, {meas(1.0, 1.0, k, 1)});
    }
    // Pairs only accumulate once both sides broadcast confirmed tracks, and
    // the window caps the count.
    CHECK(a.eta(1) > 0);
    CHECK(a.eta(1) <= params.eta_window);

    for (int64_t k = 12; k < 20; ++k) {
        run_frame(a, b, g, k, {}, {});
    }
    CHECK(a.eta(1) == 0);
}
