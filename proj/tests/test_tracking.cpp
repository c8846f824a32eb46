#include <doctest.h>

#include <cmath>

#include "dmot/errors.hpp"
#include "dmot/rng.hpp"
#include "dmot/tracking.hpp"
#include "oracles.hpp"

using namespace dmot;

namespace {

Track make_track(double px, double py, double vx, double vy, const Eigen::Matrix4d& p) {
    Track t;
    t.id = {0, 1};
    t.x << px, py, vx, vy;
    t.P = p;
    return t;
}

}  // namespace

TEST_CASE("constant velocity model structure") {
    const MotionModel m = constant_velocity_model(0.5, 0.3);
    CHECK(m.A(0, 2) == doctest::Approx(0.5));
    CHECK(m.A(1, 3) == doctest::Approx(0.5));
    CHECK(m.H(0, 0) == doctest::Approx(1.0));
    CHECK(m.H(1, 1) == doctest::Approx(1.0));
    CHECK((m.Q - m.Q.transpose()).norm() == doctest::Approx(0.0));
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(m.Q);
    CHECK(es.eigenvalues()(0) >= -1e-12);
}

TEST_CASE("predict examples") {
    const MotionModel m = constant_velocity_model(0.5, 0.0);
    Track still = make_track(1.0, 2.0, 0.0, 0.0, Eigen::Matrix4d::Identity());
    predict(still, m);
    CHECK(still.x(0) == doctest::Approx(1.0));
    CHECK(still.x(1) == doctest::Approx(2.0));
    CHECK(still.lifetime == 1);

    Track moving = make_track(0.0, 0.0, 1.0, 0.0, Eigen::Matrix4d::Identity());
    predict(moving, m);
    CHECK(moving.x(0) == doctest::Approx(0.5));
    CHECK(moving.x(1) == doctest::Approx(0.0));

    const MotionModel mq = constant_velocity_model(1.0, 0.0);
    Track zero_p = make_track(0, 0, 0, 0, Eigen::Matrix4d::Zero());
    MotionModel with_q = mq;
    with_q.Q = 0.7 * Eigen::Matrix4d::Identity();
    predict(zero_p, with_q);
    CHECK((zero_p.P - 0.7 * Eigen::Matrix4d::Identity()).norm() == doctest::Approx(0.0));
}

TEST_CASE("mahalanobis examples") {
    const MotionModel m = constant_velocity_model(0.1, 0.0);
    const Track t = make_track(1.0, 1.0, 0.0, 0.0, Eigen::Matrix4d::Zero());

    Measurement on_track{Point2(1.0, 1.0), PointCov::Identity(), 0, 0};
    CHECK(mahalanobis(on_track, t, m) == doctest::Approx(0.0));

    Measurement unit{Point2(2.0, 1.0), PointCov::Identity(), 0, 0};
    CHECK(mahalanobis(unit, t, m) == doctest::Approx(1.0));

    Measurement skew{Point2(2.0, 2.0), PointCov(), 0, 0};
    skew.cov << 4.0, 0.0, 0.0, 1.0;
    CHECK(mahalanobis(skew, t, m) == doctest::Approx(1.25));
}

TEST_CASE("mahalanobis rejects singular innovations") {
    const MotionModel m = constant_velocity_model(0.1, 0.0);
    const Track t = make_track(0.0, 0.0, 0.0, 0.0, Eigen::Matrix4d::Zero());
    Measurement z{Point2(1.0, 0.0), PointCov::Zero(), 0, 0};
    CHECK_THROWS_AS(mahalanobis(z, t, m), SingularInnovation);
}

TEST_CASE("to_information examples and identity") {
    const MotionModel m = constant_velocity_model(0.1, 0.0);
    auto [u1, U1] = to_information(Point2(1.0, 2.0), PointCov::Identity(), m);
    CHECK(u1(0) == doctest::Approx(1.0));
    CHECK(u1(1) == doctest::Approx(2.0));
    CHECK(u1(2) == doctest::Approx(0.0));
    CHECK(u1(3) == doctest::Approx(0.0));
    CHECK(U1.bottomRightCorner<2, 2>().norm() == doctest::Approx(0.0));

    auto [u4, U4] = to_information(Point2(1.0, 2.0), 4.0 * PointCov::Identity(), m);
    CHECK((4.0 * u4 - u1).norm() == doctest::Approx(0.0));
    CHECK((4.0 * U4 - U1).norm() == doctest::Approx(0.0));

    Rng rng(71);
    for (int i = 0; i < 100; ++i) {
        const Point2 z(rng.uniform(-5, 5), rng.uniform(-5, 5));
        PointCov r;
        const double a = rng.uniform(0.1, 2.0), b = rng.uniform(-0.05, 0.05);
        r << a, b, b, rng.uniform(0.1, 2.0);
        auto [u, U] = to_information(z, r, m);
        const Eigen::Vector4d x = Eigen::Vector4d::Random();
        const Eigen::Vector4d lhs = m.H.transpose() * r.inverse() * (z - m.H * x);
        CHECK((lhs - (u - U * x)).norm() < 1e-9);
    }
}

TEST_CASE("measurement_from_information inverts to_information") {
    const MotionModel m = constant_velocity_model(0.1, 0.0);
    Rng rng(73);
    for (int i = 0; i < 100; ++i) {
        const Point2 z(rng.uniform(-5, 5), rng.uniform(-5, 5));
        PointCov r;
        const double b = rng.uniform(-0.02, 0.02);
        r << rng.uniform(0.05, 1.0), b, b, rng.uniform(0.05, 1.0);
        auto [u, U] = to_information(z, r, m);
        auto [z2, r2] = measurement_from_information(u, U, m);
        CHECK((z2 - z).norm() < 1e-9);
        CHECK((r2 - r).norm() < 1e-9);
    }
    CHECK_THROWS_AS(measurement_from_information(Eigen::Vector4d::Zero(),
                                                 Eigen::Matrix4d::Zero(), m),
                    SingularCovariance);
}

TEST_CASE("kcf_update with a single local measurement equals an information-form KF") {
    const MotionModel m = constant_velocity_model(0.1, 0.4);
    Rng rng(79);
    Track t = make_track(0.0, 0.0, 0.5, -0.2, Eigen::Matrix4d::Identity());
    oracle::TextbookKf kf;
    kf.x = t.x;
    kf.P = t.P;

    for (int k = 0; k < 50; ++k) {
        const Point2 z(0.05 * k + rng.gauss(0.03), -0.02 * k + rng.gauss(0.03));
        const PointCov r = 0.01 * PointCov::Identity();
        auto [u, U] = to_information(z, r, m);
        kcf_update(t, u, U, {}, m, 1.0);
        kf.update(z, r, m);
        kf.predict(m);
        CHECK((t.x - kf.x).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((t.P - kf.P).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("kcf_update rejects a singular gain") {
    const MotionModel m = constant_velocity_model(0.1, 0.0);
    Track t = make_track(0, 0, 0, 0, Eigen::Matrix4d::Zero());  // non-invertible prior
    auto [u, U] = to_information(Point2(1.0, 1.0), PointCov(0.01 * PointCov::Identity()), m);
    CHECK_THROWS_AS(kcf_update(t, u, U, {}, m, 1.0), SingularGain);
}

TEST_CASE("kcf_update with no information and agreeing priors is pure prediction") {
    const MotionModel m = constant_velocity_model(0.1, 0.2);
    Track t = make_track(1.0, 2.0, 0.3, 0.1, Eigen::Matrix4d::Identity());
    Track expected = t;
    const std::vector<Eigen::Vector4d> priors(3, t.x);
    kcf_update(t, Eigen::Vector4d::Zero(), Eigen::Matrix4d::Zero(), priors, m, 1.0);
    predict(expected, m);
    CHECK((t.x - expected.x).norm() < 1e-12);
    CHECK((t.P - expected.P).norm() < 1e-12);
    CHECK(t.missed == 1);
}

TEST_CASE("information additivity: k identical measurements equal one with covariance R/k") {
    const MotionModel m = constant_velocity_model(0.1, 0.4);
    const Point2 z(2.0, -1.0);
    const PointCov r = 0.02 * PointCov::Identity();

    Track doubled = make_track(1.9, -0.8, 0.0, 0.0, 0.5 * Eigen::Matrix4d::Identity());
    Track halved = doubled;

    auto [u, U] = to_information(z, r, m);
    kcf_update(doubled, Eigen::Vector4d(2.0 * u), Eigen::Matrix4d(2.0 * U), {}, m, 1.0);

    auto [u2, U2] = to_information(z, PointCov(r / 2.0), m);
    kcf_update(halved, u2, U2, {}, m, 1.0);

    CHECK((doubled.x - halved.x).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((doubled.P - halved.P).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("consensus pulls disagreeing priors together without measurements") {
    MotionModel m = constant_velocity_model(0.1, 0.0);
    m.A = Eigen::Matrix4d::Identity();  // static model
    m.Q = Eigen::Matrix4d::Zero();

    std::vector<Track> tracks;
    Rng rng(83);
    for (int i = 0; i < 4; ++i) {
        Track t = make_track(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-1, 1),
                             rng.uniform(-1, 1), 0.4 * Eigen::Matrix4d::Identity());
        tracks.push_back(t);
    }

    auto max_disagreement = [&]() {
        double worst = 0.0;
        for (size_t a = 0; a < tracks.size(); ++a) {
            for (size_t b = a + 1; b < tracks.size(); ++b) {
                worst = std::max(worst, (tracks[a].x - tracks[b].x).norm());
            }
        }
        return worst;
    };

    double prev = max_disagreement();
    for (int round = 0; round < 30; ++round) {
        std::vector<Eigen::Vector4d> states;
        for (const auto& t : tracks) states.push_back(t.x);
        for (size_t i = 0; i < tracks.size(); ++i) {
            std::vector<Eigen::Vector4d> priors;
            for (size_t j = 0; j < tracks.size(); ++j) {
                if (j != i) priors.push_back(states[j]);
            }
            kcf_update(tracks[i], Eigen::Vector4d::Zero(), Eigen::Matrix4d::Zero(), priors, m, 1.0);
        }
        const double now = max_disagreement();
        CHECK(now <= prev + 1e-12);
        prev = now;
    }
    CHECK(prev < 1e-3);
}

TEST_CASE("adapt_gate inflation, decay, and floor") {
    GateParams params;
    params.alpha_trans = 2.0;
    params.alpha_rot = 0.0;
    params.decay = 0.9;

    GateState g{2.0, 2.0};
    g = adapt_gate(g, 1.0, 0.0, params);
    CHECK(g.tau == doctest::Approx(6.0));

    int steps_to_1pct = static_cast<int>(std::ceil(std::log(0.01) / std::log(params.decay)));
    GateState d = g;
    for (int i = 0; i < steps_to_1pct; ++i) d = adapt_gate(d, 0.0, 0.0, params);
    CHECK(d.tau - d.tau_base <= 0.01 * (g.tau - g.tau_base) + 1e-12);

    Rng rng(89);
    GateState f{2.0, 2.0};
    for (int i = 0; i < 200; ++i) {
        f = adapt_gate(f, rng.uniform(0, 0.5), rng.uniform(0, 0.2), params);
        CHECK(f.tau >= f.tau_base);
    }
}

TEST_CASE("gnn_associate basics") {
    const MotionModel m = constant_velocity_model(0.1, 0.0);
    GateState gate{2.0, 2.0};

    std::vector<Track> tracks = {make_track(0.0, 0.0, 0, 0, Eigen::Matrix4d::Zero())};
    std::vector<Measurement> zs = {{Point2(0.0, 0.0), 0.01 * PointCov::Identity(), 0, 0}};
    const AssociationResult hit = gnn_associate(zs, tracks, gate, m);
    CHECK(hit.matches.size() == 1);
    CHECK(hit.unmatched_measurements.empty());
    CHECK(hit.unmatched_tracks.empty());

    // A measurement just past the gate stays unmatched on both sides.
    std::vector<Measurement> far = {{Point2(0.0, 0.1500001), 0.01 * PointCov::Identity(), 0, 0}};
    // squared Mahalanobis = (0.15/0.1)^2 = 2.25 > 2.0
    const AssociationResult miss = gnn_associate(far, tracks, gate, m);
    CHECK(miss.matches.empty());
    CHECK(miss.unmatched_measurements.size() == 1);
    CHECK(miss.unmatched_tracks.size() == 1);
}

TEST_CASE("gnn_associate is globally optimal where greedy is not") {
    const MotionModel m = constant_velocity_model(0.1, 0.0);
    GateState gate{1e9, 1e9};

    // Track 0 sits between the two measurements; greedy would grab the
    // closest for it and force a bad pairing for track 1.
    std::vector<Track> tracks = {make_track(0.0, 0.0, 0, 0, Eigen::Matrix4d::Zero()),
                                 make_track(1.0, 0.0, 0, 0, Eigen::Matrix4d::Zero())};
    tracks[1].id = {0, 2};
    std::vector<Measurement> zs = {{Point2(0.4, 0.0), 0.01 * PointCov::Identity(), 0, 0},
                                   {Point2(-0.4, 0.0), 0.01 * PointCov::Identity(), 0, 0}};

    const AssociationResult res = gnn_associate(zs, tracks, gate, m);
    REQUIRE(res.matches.size() == 2);
    Eigen::MatrixXd cost(2, 2);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            cost(i, j) = mahalanobis(zs[i], tracks[j], m);
        }
    }
    double got = 0.0;
    for (const auto& [mi, tj] : res.matches) got += cost(mi, tj);
    CHECK(got == doctest::Approx(oracle::brute_force_min_cost(cost)));
    // Globally optimal pairing: measurement 1 -> track 0, measurement 0 -> track 1.
    for (const auto& [mi, tj] : res.matches) {
        if (mi == 0) CHECK(tj == 1);
        if (mi == 1) CHECK(tj == 0);
    }
}

TEST_CASE("track covariance stays symmetric PSD over long runs") {
    const MotionModel m = constant_velocity_model(0.1, 0.5);
    Rng rng(97);
    Track t = make_track(0, 0, 0, 0, Eigen::Matrix4d::Identity());
    for (int k = 0; k < 2000; ++k) {
        if (rng.bernoulli(0.7)) {
            const Point2 z(rng.uniform(-1, 1), rng.uniform(-1, 1));
            auto [u, U] = to_information(z, PointCov(0.01 * PointCov::Identity()), m);
            kcf_update(t, u, U, {}, m, 1.0);
        } else {
            kcf_update(t, Eigen::Vector4d::Zero(), Eigen::Matrix4d::Zero(), {}, m, 1.0);
        }
        CHECK((t.P - t.P.transpose()).norm() < 1e-10);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(t.P);
        CHECK(es.eigenvalues()(0) >= -1e-10);
    }
}
