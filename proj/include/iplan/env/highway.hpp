#pragma once

#include <optional>
#include <random>

#include "iplan/config.hpp"
#include "iplan/env/core.hpp"

namespace iplan::env {

enum class MetaAction { LaneLeft = 0, Idle = 1, LaneRight = 2, Faster = 3, Slower = 4 };

enum class DriverKind { Normal, Aggressive, Conservative };

/// Kinematics-table row for one behavior-driven vehicle model. The desired
/// front distance already includes the vehicle-length term where the table
/// says "+ l".
struct DriverProfile {
    DriverKind kind = DriverKind::Normal;
    double max_speed = 40.0;           // m/s
    double speed_range_lo = 23.0;      // default speed range
    double speed_range_hi = 25.0;
    double max_accel = 6.0;            // m/s^2, symmetric clamp on IDM output
    double desired_accel = 3.0;        // IDM a
    double desired_decel = -5.0;       // IDM b (negative in the table)
    double desired_front_distance = 10.0;  // IDM s0
    double time_wanted = 1.5;          // IDM T
    double politeness = 0.3;           // MOBIL p

    static DriverProfile of(DriverKind kind, double vehicle_length);
};

struct VehicleState {
    int id = 0;
    int lane = 0;        // current lane from lateral position
    double x = 0.0, y = 0.0;  // m
    double heading = 0.0;     // rad, 0 = +x
    double speed = 0.0;       // m/s, >= 0
    double length = 5.0;      // m
    bool crashed = false;
};

// --- car-following / lane-change / motion primitives ---

/// IDM with exponent 4: a = A [1 - (v/v0)^4 - (s*/gap)^2], clamped to
/// [-max_accel, +max_accel]. No leader: pass gap = +inf, v_lead = v.
/// Non-positive gap means imminent collision: returns maximum braking.
double idm_acceleration(double v, double v_lead, double gap, const DriverProfile& p, double v0);

/// Kinematic bicycle with the reference point at the geometric centre:
/// slip = atan(tan(steering)/2), heading rate v sin(slip)/(l/2).
VehicleState bicycle_step(const VehicleState& state, double accel, double steering, double dt,
                          double max_speed);

/// MOBIL incentive: gain = da_ego + p (da_new_follower + da_old_follower),
/// change when gain > threshold and the new follower can brake within the
/// changer's comfortable deceleration.
struct MobilContext {
    // accelerations before/after the hypothetical change
    double ego_accel_now = 0.0;
    double ego_accel_after = 0.0;
    double new_follower_accel_now = 0.0;
    double new_follower_accel_after = 0.0;
    double old_follower_accel_now = 0.0;
    double old_follower_accel_after = 0.0;
};
bool mobil_should_change(const MobilContext& ctx, double politeness, double safe_decel,
                         double threshold);

/// Oriented-rectangle overlap (separating axis test).
bool rect_overlap(double ax, double ay, double ah, double alen, double awid, double bx, double by,
                  double bh, double blen, double bwid);

/// Two-level proportional controller: lateral position -> heading -> steering.
double lateral_steering(double y, double target_y, double heading, double speed,
                        double vehicle_length);

/// 8-lane highway with IDM/MOBIL behavior vehicles and meta-action egos.
class HighwayEnv final : public Environment {
  public:
    explicit HighwayEnv(const RunConfig& cfg);

    std::string name() const override { return "highway"; }
    std::string scenario() const override { return scenario_; }
    int num_agents() const override { return n_controlled_; }
    int obs_capacity() const override { return 15; }
    int num_actions() const override { return 5; }
    int horizon() const override { return horizon_; }

    std::vector<Observation> reset(uint64_t seed) override;
    StepResult step(const std::vector<int>& actions) override;
    Observation observe(int agent_id) const override;

    int tick() const override { return tick_; }
    bool episode_done() const override;
    std::vector<EntityState> entity_states() const override;

    // introspection for tests
    const std::vector<VehicleState>& vehicles() const { return vehicles_; }
    const std::vector<DriverProfile>& behavior_profiles() const { return behavior_profiles_; }
    const std::vector<double>& behavior_targets() const { return behavior_target_speed_; }
    int lane_of(double y) const;
    double lane_center(int lane) const { return lane * lane_width_; }
    double reward_for(const VehicleState& v, double speed, bool crashed_this_tick) const;
    bool lane_change_flagged(int agent_idx) const { return infeasible_flag_[static_cast<size_t>(agent_idx)]; }

  private:
    struct EgoControl {
        double target_speed = 25.0;
        int target_lane = 0;
    };

    int vehicle_index(int id) const { return id; }
    std::optional<int> leader_in_lane(int veh_idx, int lane) const;
    std::optional<int> follower_in_lane(int veh_idx, int lane) const;
    double gap_between(int rear_idx, int front_idx) const;
    double idm_for(int veh_idx, int lane) const;
    double idm_hypothetical(int veh_idx, int leader_idx) const;
    void maybe_change_lane(int veh_idx);
    void substep();
    void check_collisions();

    std::string scenario_;
    int horizon_;
    int lanes_;
    double lane_width_;
    int n_controlled_;
    int n_behavior_;
    double density_;
    int substeps_;
    double dt_;
    double veh_length_, veh_width_;
    double speed_delta_;
    double ego_max_speed_, ego_max_accel_, ego_init_speed_;
    double mobil_threshold_;
    double spawn_spacing_;

    std::vector<VehicleState> vehicles_;  // controlled first, then behavior-driven
    std::vector<DriverProfile> behavior_profiles_;    // per behavior vehicle
    std::vector<double> behavior_target_speed_;       // v0 drawn once per episode
    std::vector<int> behavior_target_lane_;
    std::vector<EgoControl> ego_control_;
    std::vector<bool> crashed_this_tick_;
    std::vector<bool> infeasible_flag_;
    std::vector<double> speed_at_done_;
    std::vector<bool> done_emitted_;
    std::mt19937_64 rng_;
    int tick_ = 0;
};

}  // namespace iplan::env
