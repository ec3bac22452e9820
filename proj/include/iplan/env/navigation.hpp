#pragma once

#include <random>

#include "iplan/config.hpp"
#include "iplan/env/core.hpp"

namespace iplan::env {

enum class NavAction { Idle = 0, Up = 1, Down = 2, Left = 3, Right = 4 };

enum class NavKind { Normal, Tiny, Bulky, Random };

/// Agent-parameter table row; Random agents are uncontrollable.
struct NavAgentProfile {
    NavKind kind = NavKind::Normal;
    double size = 0.08;
    double acceleration = 1.0;
    bool controllable = true;

    static NavAgentProfile of(NavKind kind);
};

// --- stateless pieces, unit-testable in isolation ---

struct NavBody {
    double px = 0, py = 0, vx = 0, vy = 0;
};

/// Damped double integrator: v' = (1 - damping) v + a dt, p' = p + v' dt.
NavBody nav_dynamics(const NavBody& state, NavAction action, const NavAgentProfile& profile,
                     double dt, double damping);

/// Strict inequality: contact at exactly size_a + size_b is not a collision.
bool nav_collision(double ax, double ay, double size_a, double bx, double by, double size_b);

NavAction random_agent_policy(std::mt19937_64& rng);

/// n heterogeneous point agents covering landmarks in a 2x2 world.
class NavigationEnv final : public Environment {
  public:
    explicit NavigationEnv(const RunConfig& cfg);

    std::string name() const override { return "navigation"; }
    std::string scenario() const override { return scenario_; }
    int num_agents() const override { return n_controllable_; }
    int obs_capacity() const override;
    int num_actions() const override { return 5; }
    int horizon() const override { return horizon_; }

    std::vector<Observation> reset(uint64_t seed) override;
    StepResult step(const std::vector<int>& actions) override;
    Observation observe(int agent_id) const override;

    int tick() const override { return tick_; }
    bool episode_done() const override { return tick_ >= horizon_; }
    std::vector<EntityState> entity_states() const override;

    // reward decomposition, assertable per term from world state
    double closest_landmark_distance(int agent_idx) const;
    int collisions_this_tick(int agent_idx) const { return collisions_[static_cast<size_t>(agent_idx)]; }
    const std::vector<NavAgentProfile>& profiles() const { return profiles_; }
    int num_total_agents() const { return static_cast<int>(profiles_.size()); }
    int num_landmarks() const { return static_cast<int>(landmarks_.size()); }

  private:
    double reward_for(int agent_idx, bool team_bonus) const;

    std::string scenario_;
    int horizon_;
    double dt_, damping_;
    int n_controllable_ = 0;
    std::vector<NavAgentProfile> profiles_;
    std::vector<NavBody> agents_;
    std::vector<std::pair<double, double>> landmarks_;
    std::vector<int> collisions_;  // per agent, this tick
    std::mt19937_64 rng_;
    int tick_ = 0;
};

}  // namespace iplan::env
