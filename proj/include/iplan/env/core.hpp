#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "iplan/error.hpp"

namespace iplan::env {

/// One agent/vehicle/landmark as seen by an observer: id, position, velocity.
struct EntityState {
    int id = 0;
    double px = 0.0, py = 0.0;
    double vx = 0.0, vy = 0.0;
};

/// Ego state (absolute position) plus a fixed-capacity masked list of
/// neighbor states with positions relative to ego. Masked slots are all-zero.
struct Observation {
    EntityState ego;
    std::vector<EntityState> neighbors;
    std::vector<bool> present;

    int capacity() const { return static_cast<int>(neighbors.size()); }
};

/// What one agent gets back from a single environment step.
struct AgentStep {
    Observation obs;       // observation after the step
    double reward = 0.0;
    bool done = false;
    bool collided = false;     // collision happened this tick
    bool action_ignored = false;  // action supplied for an already-done agent
    double speed = 0.0;
    int lane = -1;             // highway only
};

struct StepResult {
    int tick = 0;
    bool episode_done = false;
    std::vector<AgentStep> agents;
};

/// Time-aligned sliding windows of observed entity states. Entities that
/// leave scope keep their track; the missing ticks simply come back masked.
class HistoryBuffer {
  public:
    explicit HistoryBuffer(int window) : window_(window) {}

    void record(int tick, const EntityState& state);
    void clear();

    /// The last `window` ticks ending at `t` for one entity, oldest first,
    /// zero-padded and masked where no observation exists.
    struct Window {
        std::vector<EntityState> states;  // length == window
        std::vector<bool> valid;
    };
    Window window_at(int entity_id, int t) const;

    std::vector<int> tracked_ids() const;
    bool tracks(int entity_id) const { return tracks_.count(entity_id) > 0; }
    int window() const { return window_; }

  private:
    struct Sample {
        int tick;
        EntityState state;
    };
    int window_;
    std::map<int, std::vector<Sample>> tracks_;  // ring of the last `window_` samples
};

/// Per-agent record of one full episode: the replay unit for training.
struct TickRecord {
    Observation obs;     // observation the action was chosen from
    int action = 0;
    double reward = 0.0;
    bool done = false;
    bool collided = false;
    double speed = 0.0;
    int lane = -1;
    // latent estimates stored during the rollout (by entity id), for replay
    std::map<int, std::array<double, 8>> beta;
    std::vector<double> zeta;
};

struct EpisodeRecord {
    int agent_id = 0;
    uint64_t seed = 0;
    std::vector<TickRecord> ticks;

    int length() const { return static_cast<int>(ticks.size()); }
    /// Observed state of `entity_id` at tick t, if any (searches ego + slots).
    const EntityState* observed_state(int entity_id, int t) const;
};

class Environment {
  public:
    virtual ~Environment() = default;

    virtual std::string name() const = 0;
    virtual std::string scenario() const = 0;
    virtual int num_agents() const = 0;    // controllable agents
    virtual int obs_capacity() const = 0;  // neighbor slots per observation
    virtual int num_actions() const = 0;
    virtual int horizon() const = 0;

    /// Deterministic for a given (config, seed). Returns initial observations.
    virtual std::vector<Observation> reset(uint64_t seed) = 0;
    /// One synchronous decision step; expects one action per agent.
    virtual StepResult step(const std::vector<int>& actions) = 0;
    virtual Observation observe(int agent_id) const = 0;

    virtual int tick() const = 0;
    virtual bool episode_done() const = 0;
    /// Absolute states of every entity, for logging.
    virtual std::vector<EntityState> entity_states() const = 0;
};

}  // namespace iplan::env
