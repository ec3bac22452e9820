#pragma once

#include <deque>
#include <memory>

#include "iplan/agent/behavior.hpp"
#include "iplan/agent/instant.hpp"
#include "iplan/agent/ppo.hpp"
#include "iplan/config.hpp"
#include "iplan/env/core.hpp"

namespace iplan::agent {

/// One decentralized agent: PPO controller plus optional behavioral and
/// instant inference modules, with all per-episode latent bookkeeping. Each
/// agent owns its parameters; nothing is shared across agents.
class AgentRuntime {
  public:
    AgentRuntime(const RunConfig& cfg, int agent_id, int obs_capacity, uint64_t master_seed);

    /// Clears histories and re-initialises latent estimates to zero.
    void episode_reset();

    struct PreparedTick {
        std::vector<double> policy_input;
        std::map<int, BetaVec> beta;  // latents after this tick's update
        std::vector<double> zeta;
        num::Tensor attention;  // instant-module attention over the node graph
    };
    /// Algorithm order per tick: record observations, update behavioral
    /// latents, then the instant latent, and assemble the policy input.
    /// Action selection happens separately so a PPO update can slot between
    /// input preparation (bootstrap value) and acting.
    PreparedTick prepare(const env::Observation& obs, int tick);

    ActionChoice choose(const PreparedTick& prep, bool greedy) {
        return ppo_->select_action(prep.policy_input, policy_rng_, greedy);
    }

    PpoController& ppo() { return *ppo_; }
    BehaviorModule* behavior() { return behavior_ ? behavior_.get() : nullptr; }
    InstantModule* instant() { return instant_ ? instant_.get() : nullptr; }
    std::mt19937_64& policy_rng() { return policy_rng_; }
    std::mt19937_64& dropout_rng() { return dropout_rng_; }
    std::mt19937_64& sample_rng() { return sample_rng_; }

    int agent_id() const { return agent_id_; }
    int input_dim() const { return input_dim_; }

    /// Every parameter tensor owned by this agent (for the sharing audit).
    std::vector<num::Var> all_parameters() const;
    void save(num::Checkpoint& ckpt) const;
    void load(const num::Checkpoint& ckpt);

  private:
    std::string prefix() const { return "agent" + std::to_string(agent_id_); }

    RunConfig cfg_;
    int agent_id_;
    int capacity_;
    int input_dim_;
    FeatureScales scales_;
    std::unique_ptr<PpoController> ppo_;
    std::unique_ptr<BehaviorModule> behavior_;
    std::unique_ptr<InstantModule> instant_;
    env::HistoryBuffer history_;
    std::map<int, BetaVec> beta_;
    std::vector<double> zeta_;
    std::mt19937_64 policy_rng_, dropout_rng_, sample_rng_;
};

}  // namespace iplan::agent
