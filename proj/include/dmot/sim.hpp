#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dmot/geometry.hpp"
#include "dmot/registration.hpp"
#include "dmot/rng.hpp"
#include "dmot/robot.hpp"
#include "dmot/runlog.hpp"

namespace dmot {

struct FovConfig {
    double range_m = 7.0;
    double half_angle_rad = 1.0471975511965976;  // 60 deg
};

struct StaticTraj {};

struct CircularTraj {
    Point2 center = Point2::Zero();
    double radius = 2.0;
    double angular_rate = 0.25;  // rad/s, sign sets direction
    double phase0 = 0.0;
};

struct WaypointTraj {
    std::vector<Point2> waypoints;
    double speed = 0.5;  // m/s, loops through the waypoint cycle
};

using Trajectory = std::variant<StaticTraj, CircularTraj, WaypointTraj>;

struct RobotConfig {
    Pose2 initial;  // used directly by static trajectories
    Trajectory trajectory;
    FovConfig fov;
};

struct PedestrianConfig {
    std::vector<Point2> waypoints;
    double speed_mps = 1.2;
};

struct OdomNoise {
    double sigma_v = 0.0;      // m per step, on the body-frame translation
    double sigma_omega = 0.0;  // rad per step, on the heading increment
};

struct DetectionNoise {
    double sigma_z_m = 0.05;
    double p_detect = 0.95;
    double clutter_rate = 0.0;  // expected false detections per frame (Poisson)
};

struct LandmarkNoise {
    double sigma_l_m = 0.03;
    double p_detect = 0.9;
};

enum class RealignMode { off, static_landmarks, dynamic_objects, automatic };

struct RealignConfig {
    RealignMode mode = RealignMode::off;
    bool reactive_gate = false;
    double map_share_hz = 1.0;
    int tau_eta = 100;
    int64_t map_max_age_frames = 150;
};

struct ErrorInjectionConfig {
    bool enabled = false;
    double sigma_t_m = 0.0;  // heading error scales at 8.12 deg per meter
};

struct ScenarioConfig {
    double arena_width_m = 10.0;
    double arena_height_m = 10.0;
    double frame_rate_hz = 10.0;
    double duration_s = 60.0;
    uint64_t rng_seed = 1;
    bool ground_truth_localization = false;
    std::vector<RobotConfig> robots;
    std::vector<PedestrianConfig> pedestrians;
    std::vector<Point2> landmarks;
    OdomNoise odom_noise;
    DetectionNoise detection;
    LandmarkNoise landmark_detection;
    ErrorInjectionConfig error_injection;
    RealignConfig realign;
    TrackerParams tracker;
    RegistrationParams registration;
    AlignmentCovScale alignment_cov;
    std::optional<std::vector<std::vector<uint8_t>>> comm_adjacency;  // default: complete
    double d_match_m = 1.0;
    bool trace_comms = false;

    int64_t total_frames() const;
    /// Throws ConfigError describing the violated constraint.
    void validate() const;
};

ScenarioConfig config_from_json_text(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);

/// True world pose along a trajectory at time t (heading follows the motion
/// direction for moving trajectories).
Pose2 trajectory_pose(const RobotConfig& robot, double t);
Point2 pedestrian_position(const PedestrianConfig& ped, double t);

struct OdomStep {
    Pose2 increment;          // noisy body-frame increment
    PoseCov cov = PoseCov::Zero();  // covariance of that increment
};

/// Perturb a body-frame motion increment. A zero increment stays exact (a
/// stationary robot accumulates no drift).
OdomStep step_odometry(const Pose2& true_increment, const OdomNoise& noise, Rng& rng);

/// Field-of-view test in the sensor frame.
bool in_fov(const Pose2& sensor_world, const FovConfig& fov, const Point2& target_world);

/// Detect pedestrians in view: true relative position + noise, mapped into
/// the robot's local frame through its (possibly drifted) pose estimate with
/// the localization uncertainty folded into each covariance. Clutter is
/// Poisson over the field-of-view wedge.
std::vector<Measurement> detect_pedestrians(const Pose2& true_world, const Pose2& est_local,
                                            const PoseCov& pose_cov, const FovConfig& fov,
                                            const std::vector<Point2>& pedestrians_world,
                                            const DetectionNoise& noise, int64_t frame,
                                            int32_t robot, Rng& rng);

/// Detect static landmarks in view and merge them into the robot's map.
void detect_landmarks(const Pose2& true_world, const Pose2& est_local, const FovConfig& fov,
                      const std::vector<Point2>& landmarks_world, const LandmarkNoise& noise,
                      int64_t frame, double merge_radius, LandmarkMap& map, Rng& rng);

/// Sample a pose error with translation magnitude |N(0, sigma_t)| in a
/// uniformly random direction and heading N(0, 8.12 deg/m * sigma_t).
Pose2 inject_alignment_error(double sigma_t_m, Rng& rng);

enum class RealignChoice { none, static_landmarks, dynamic_objects };

RealignChoice select_realign_mode(int eta, int tau_eta, RealignMode mode, bool map_available);

/// Execute the full scenario; the result is a pure function of the config
/// except for the wall-clock timing rows.
RunLog run_scenario(const ScenarioConfig& cfg);

}  // namespace dmot
