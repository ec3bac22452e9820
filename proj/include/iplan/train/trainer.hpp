#pragma once

#include <deque>
#include <functional>
#include <memory>

#include "iplan/agent/runtime.hpp"
#include "iplan/env/factory.hpp"
#include "iplan/env/log.hpp"
#include "iplan/eval/metrics.hpp"

namespace iplan::train {

/// Everything needed to bitwise-reproduce a run.
struct RunManifest {
    RunConfig config;
    uint64_t config_hash = 0;
    std::string code_version = "iplan-1";
    std::vector<std::pair<std::string, uint64_t>> stream_seeds;

    std::string serialize() const;
};

struct EvalOutcome {
    metrics::MetricRow row;
    std::vector<env::EpisodeLog> logs;
};

/// The decentralized training loop: environment stepping with per-agent
/// inference, episode storage, and the per-agent gradient phase (PPO update,
/// behavioral update, instant update, in that order).
class Trainer {
  public:
    explicit Trainer(const RunConfig& cfg);

    /// Full training run; writes manifest, stats, checkpoints and episode
    /// logs under cfg.out_dir. Returns the final checkpoint path.
    std::string run();

    /// Greedy evaluation with frozen parameters over fresh environments.
    EvalOutcome evaluate(int n_episodes, uint64_t eval_seed);

    RunManifest manifest() const;
    std::vector<agent::AgentRuntime>& agents() { return agents_; }
    env::Environment& environment() { return *env_; }
    const RunConfig& config() const { return cfg_; }
    int64_t steps_done() const { return total_steps_; }
    /// Module updates skipped due to numeric faults (nonzero exit from the CLI).
    int64_t aborted_updates() const { return aborted_updates_; }

    void save_checkpoint_file(const std::string& path) const;
    void load_checkpoint_file(const std::string& path);

    /// Rebuilds a trainer from a checkpoint (config embedded in its meta).
    static std::unique_ptr<Trainer> from_checkpoint(const std::string& path);

    struct EpisodeOutcome {
        std::vector<double> rewards;  // per agent
        std::vector<env::EpisodeRecord> records;
        env::EpisodeLog log;
    };
    /// One full episode; with training enabled, transitions feed the rollout
    /// buffers and gradient phases fire as buffers fill.
    EpisodeOutcome run_episode(env::Environment& env, uint64_t episode_seed, bool training,
                               bool collect_latents);

  private:
    void gradient_phase(int agent_idx, double bootstrap_value);
    void write_stats_row(int agent_idx, double policy_loss, double value_loss, double entropy,
                         double clip_fraction, double behavior_loss, double instant_loss);

    RunConfig cfg_;
    std::unique_ptr<env::Environment> env_;
    std::vector<agent::AgentRuntime> agents_;
    std::vector<std::vector<agent::Transition>> rollouts_;
    std::vector<std::deque<env::EpisodeRecord>> stores_;
    int64_t total_steps_ = 0;
    int64_t episode_index_ = 0;
    int64_t aborted_updates_ = 0;
    std::string stats_path_, rewards_path_, eval_path_, train_log_path_;
    bool files_open_ = false;
};

}  // namespace iplan::train
