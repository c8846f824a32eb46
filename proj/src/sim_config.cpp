#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dmot/errors.hpp"
#include "dmot/network.hpp"
#include "dmot/sim.hpp"

namespace dmot {

namespace {

using nlohmann::json;

Point2 parse_point(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 2) {
        throw ConfigError(std::string(what) + " must be a [x, y] pair");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

Pose2 parse_pose(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) {
        throw ConfigError(std::string(what) + " must be a [x, y, theta] triple");
    }
    return Pose2(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

std::vector<Point2> parse_points(const json& j, const char* what) {
    std::vector<Point2> out;
    for (const auto& p : j) out.push_back(parse_point(p, what));
    return out;
}

Trajectory parse_trajectory(const json& j) {
    const std::string type = j.value("type", "static");
    if (type == "static") return StaticTraj{};
    if (type == "circular") {
        CircularTraj c;
        c.center = parse_point(j.at("center"), "trajectory center");
        c.radius = j.at("radius").get<double>();
        c.angular_rate = j.at("angular_rate").get<double>();
        c.phase0 = j.value("phase", 0.0);
        return c;
    }
    if (type == "waypoints") {
        WaypointTraj w;
        w.waypoints = parse_points(j.at("points"), "trajectory waypoint");
        w.speed = j.at("speed").get<double>();
        return w;
    }
    throw ConfigError("unknown trajectory type '" + type + "'");
}

RealignMode parse_mode(const std::string& s) {
    if (s == "off") return RealignMode::off;
    if (s == "static") return RealignMode::static_landmarks;
    if (s == "dynamic") return RealignMode::dynamic_objects;
    if (s == "auto") return RealignMode::automatic;
    throw ConfigError("realign mode must be one of off/static/dynamic/auto, got '" + s + "'");
}

}  // namespace

ScenarioConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }

    ScenarioConfig cfg;
    try {
        if (j.contains("arena")) {
            cfg.arena_width_m = j["arena"].value("width_m", cfg.arena_width_m);
            cfg.arena_height_m = j["arena"].value("height_m", cfg.arena_height_m);
        }
        cfg.frame_rate_hz = j.value("frame_rate_hz", cfg.frame_rate_hz);
        cfg.duration_s = j.value("duration_s", cfg.duration_s);
        cfg.rng_seed = j.value("rng_seed", cfg.rng_seed);
        cfg.ground_truth_localization = j.value("localization", "odometry") == "ground_truth";

        for (const auto& rj : j.at("robots")) {
            RobotConfig r;
            if (rj.contains("initial")) r.initial = parse_pose(rj["initial"], "robot initial pose");
            if (rj.contains("trajectory")) r.trajectory = parse_trajectory(rj["trajectory"]);
            if (rj.contains("fov")) {
                r.fov.range_m = rj["fov"].value("range_m", r.fov.range_m);
                if (rj["fov"].contains("half_angle_deg")) {
                    r.fov.half_angle_rad =
                        rj["fov"]["half_angle_deg"].get<double>() * 0.0174532925199433;
                }
            }
            cfg.robots.push_back(std::move(r));
        }
        for (const auto& pj : j.value("pedestrians", json::array())) {
            PedestrianConfig p;
            p.waypoints = parse_points(pj.at("waypoints"), "pedestrian waypoint");
            p.speed_mps = pj.value("speed_mps", p.speed_mps);
            cfg.pedestrians.push_back(std::move(p));
        }
        if (j.contains("landmarks")) {
            cfg.landmarks = parse_points(j["landmarks"], "landmark");
        }

        if (j.contains("noise")) {
            const auto& nj = j["noise"];
            if (nj.contains("odometry")) {
                cfg.odom_noise.sigma_v = nj["odometry"].value("sigma_v", 0.0);
                cfg.odom_noise.sigma_omega = nj["odometry"].value("sigma_omega", 0.0);
            }
            if (nj.contains("detection")) {
                cfg.detection.sigma_z_m = nj["detection"].value("sigma_z_m", cfg.detection.sigma_z_m);
                cfg.detection.p_detect = nj["detection"].value("p_detect", cfg.detection.p_detect);
                cfg.detection.clutter_rate =
                    nj["detection"].value("clutter_rate", cfg.detection.clutter_rate);
            }
            if (nj.contains("landmark_detection")) {
                cfg.landmark_detection.sigma_l_m =
                    nj["landmark_detection"].value("sigma_l_m", cfg.landmark_detection.sigma_l_m);
                cfg.landmark_detection.p_detect =
                    nj["landmark_detection"].value("p_detect", cfg.landmark_detection.p_detect);
            }
        }

        if (j.contains("error_injection") && !j["error_injection"].is_null()) {
            cfg.error_injection.enabled = true;
            cfg.error_injection.sigma_t_m = j["error_injection"].value("sigma_t_m", 0.0);
        }

        if (j.contains("realign")) {
            const auto& aj = j["realign"];
            cfg.realign.mode = parse_mode(aj.value("mode", "off"));
            cfg.realign.reactive_gate = aj.value("reactive_gate", false);
            cfg.realign.map_share_hz = aj.value("map_share_hz", cfg.realign.map_share_hz);
            cfg.realign.tau_eta = aj.value("tau_eta", cfg.realign.tau_eta);
            if (aj.contains("map_max_age_s")) {
                cfg.realign.map_max_age_frames = static_cast<int64_t>(
                    std::llround(aj["map_max_age_s"].get<double>() * cfg.frame_rate_hz));
            }
        }

        if (j.contains("tracker")) {
            const auto& tj = j["tracker"];
            auto& t = cfg.tracker;
            t.process_noise = tj.value("process_noise", t.process_noise);
            t.v_max = tj.value("v_max", t.v_max);
            t.n_confirm = tj.value("n_confirm", t.n_confirm);
            t.n_miss_max = tj.value("n_miss_max", t.n_miss_max);
            t.tau_gate = tj.value("tau_gate", t.tau_gate);
            t.gate.alpha_trans = tj.value("gate_alpha_trans", t.gate.alpha_trans);
            t.gate.alpha_rot = tj.value("gate_alpha_rot", t.gate.alpha_rot);
            t.gate.decay = tj.value("gate_decay", t.gate.decay);
            t.adopt_gate_scale = tj.value("adopt_gate_scale", t.adopt_gate_scale);
            t.consensus_gain_cap = tj.value("consensus_gain_cap", t.consensus_gain_cap);
            t.dup_radius = tj.value("dup_radius", t.dup_radius);
            t.dup_frames = tj.value("dup_frames", t.dup_frames);
            t.use_alignment_cov = tj.value("use_alignment_cov", t.use_alignment_cov);
            t.loose_pair_radius = tj.value("loose_pair_radius", t.loose_pair_radius);
            t.eta_window = tj.value("eta_window", t.eta_window);
        }

        if (j.contains("registration")) {
            const auto& rj = j["registration"];
            auto& r = cfg.registration;
            r.icp_reject_radius = rj.value("icp_reject_radius", r.icp_reject_radius);
            r.icp_max_iter = rj.value("icp_max_iter", r.icp_max_iter);
            r.icp_tol = rj.value("icp_tol", r.icp_tol);
            r.merge_radius = rj.value("merge_radius", r.merge_radius);
            r.weight_max = rj.value("weight_max", r.weight_max);
            r.weight_eps = rj.value("weight_eps", r.weight_eps);
        }

        if (j.contains("alignment_cov")) {
            const auto& aj = j["alignment_cov"];
            auto& a = cfg.alignment_cov;
            a.c_trans = aj.value("c_trans", a.c_trans);
            a.c_rot = aj.value("c_rot", a.c_rot);
            a.sigma_trans0 = aj.value("sigma_trans0", a.sigma_trans0);
            a.sigma_rot0 = aj.value("sigma_rot0", a.sigma_rot0);
        }

        if (j.contains("comm_graph")) {
            std::vector<std::vector<uint8_t>> adj;
            for (const auto& row : j["comm_graph"]) {
                std::vector<uint8_t> r;
                for (const auto& v : row) r.push_back(v.get<int>() != 0 ? 1 : 0);
                adj.push_back(std::move(r));
            }
            cfg.comm_adjacency = std::move(adj);
        }

        if (j.contains("evaluation")) {
            cfg.d_match_m = j["evaluation"].value("d_match_m", cfg.d_match_m);
        }
        cfg.trace_comms = j.value("trace_comms", false);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }

    cfg.validate();
    return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json_text(buf.str());
}

int64_t ScenarioConfig::total_frames() const {
    return static_cast<int64_t>(std::llround(duration_s * frame_rate_hz));
}

namespace {

void check_in_arena(const Point2& p, double w, double h, const std::string& what) {
    if (p.x() < 0.0 || p.x() > w || p.y() < 0.0 || p.y() > h) {
        throw ConfigError(what + " at (" + std::to_string(p.x()) + ", " + std::to_string(p.y()) +
                          ") leaves the arena");
    }
}

}  // namespace

void ScenarioConfig::validate() const {
    if (arena_width_m <= 0.0 || arena_height_m <= 0.0) {
        throw ConfigError("arena dimensions must be positive");
    }
    if (frame_rate_hz <= 0.0) throw ConfigError("frame_rate_hz must be positive");
    if (duration_s <= 0.0) throw ConfigError("duration_s must be positive");
    if (robots.empty()) throw ConfigError("at least one robot is required");
    if (realign.map_share_hz < 0.0) throw ConfigError("map_share_hz must be non-negative");
    if (realign.map_share_hz > frame_rate_hz) {
        throw ConfigError("map_share_hz cannot exceed the frame rate");
    }
    if (realign.tau_eta < 0) throw ConfigError("tau_eta must be non-negative");
    if (detection.p_detect < 0.0 || detection.p_detect > 1.0) {
        throw ConfigError("detection p_detect must lie in [0, 1]");
    }
    if (landmark_detection.p_detect < 0.0 || landmark_detection.p_detect > 1.0) {
        throw ConfigError("landmark p_detect must lie in [0, 1]");
    }
    if (detection.sigma_z_m < 0.0 || detection.clutter_rate < 0.0 ||
        landmark_detection.sigma_l_m < 0.0 || odom_noise.sigma_v < 0.0 ||
        odom_noise.sigma_omega < 0.0) {
        throw ConfigError("noise levels must be non-negative");
    }
    if (error_injection.enabled && error_injection.sigma_t_m < 0.0) {
        throw ConfigError("error injection sigma_t_m must be non-negative");
    }
    if (d_match_m <= 0.0) throw ConfigError("evaluation d_match_m must be positive");
    if (tracker.tau_gate <= 0.0) throw ConfigError("tau_gate must be positive");

    for (size_t i = 0; i < robots.size(); ++i) {
        const auto& r = robots[i];
        const std::string name = "robot " + std::to_string(i);
        if (std::holds_alternative<StaticTraj>(r.trajectory)) {
            check_in_arena({r.initial.x, r.initial.y}, arena_width_m, arena_height_m,
                           name + " initial pose");
        } else if (const auto* c = std::get_if<CircularTraj>(&r.trajectory)) {
            if (c->radius <= 0.0) throw ConfigError(name + " circular radius must be positive");
            check_in_arena(c->center + Point2(c->radius, 0), arena_width_m, arena_height_m,
                           name + " circular path");
            check_in_arena(c->center - Point2(c->radius, 0), arena_width_m, arena_height_m,
                           name + " circular path");
            check_in_arena(c->center + Point2(0, c->radius), arena_width_m, arena_height_m,
                           name + " circular path");
            check_in_arena(c->center - Point2(0, c->radius), arena_width_m, arena_height_m,
                           name + " circular path");
        } else if (const auto* w = std::get_if<WaypointTraj>(&r.trajectory)) {
            if (w->waypoints.size() < 2) {
                throw ConfigError(name + " waypoint trajectory needs at least 2 points");
            }
            if (w->speed <= 0.0) throw ConfigError(name + " waypoint speed must be positive");
            for (const auto& p : w->waypoints) {
                check_in_arena(p, arena_width_m, arena_height_m, name + " waypoint");
            }
        }
        if (r.fov.range_m <= 0.0 || r.fov.half_angle_rad <= 0.0) {
            throw ConfigError(name + " field of view must have positive range and half-angle");
        }
    }

    for (size_t i = 0; i < pedestrians.size(); ++i) {
        const auto& p = pedestrians[i];
        const std::string name = "pedestrian " + std::to_string(i);
        if (p.waypoints.empty()) throw ConfigError(name + " needs at least one waypoint");
        if (p.waypoints.size() > 1 && p.speed_mps <= 0.0) {
            throw ConfigError(name + " speed must be positive");
        }
        for (const auto& wp : p.waypoints) {
            check_in_arena(wp, arena_width_m, arena_height_m, name + " waypoint");
        }
    }
    for (const auto& l : landmarks) {
        check_in_arena(l, arena_width_m, arena_height_m, "landmark");
    }

    if (comm_adjacency.has_value()) {
        if (comm_adjacency->size() != robots.size()) {
            throw ConfigError("comm_graph size does not match the robot count");
        }
        CommGraph::from_adjacency(*comm_adjacency);  // throws ConfigError on violations
    }
}

}  // namespace dmot
