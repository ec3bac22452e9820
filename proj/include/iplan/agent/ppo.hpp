#pragma once

#include <optional>

#include "iplan/checkpoint.hpp"
#include "iplan/layers.hpp"
#include "iplan/optim.hpp"

namespace iplan::agent {

struct PpoConfig {
    int input_dim = 0;
    int hidden = 64;
    int actions = 5;
    double lr = 5e-4;
    int rollout_size = 256;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_eps = 0.2;
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    int epochs = 4;
    int minibatch = 64;
    double grad_clip = 0.5;
};

struct Transition {
    std::vector<double> input;
    int action = 0;
    double log_prob = 0.0;
    double reward = 0.0;
    double value = 0.0;
    bool done = false;
};

struct GaeResult {
    std::vector<double> advantages;  // not normalised
    std::vector<double> returns;
};

/// Standard GAE recursion over a rollout; `bootstrap` is the value estimate
/// past the final transition (ignored when that transition is terminal).
GaeResult compute_gae(const std::vector<Transition>& rollout, double gamma, double lambda,
                      double bootstrap);

struct ActionChoice {
    int action = 0;
    double log_prob = 0.0;
    double value = 0.0;
};

struct UpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
};

/// Per-agent clipped-surrogate PPO with separate actor and critic MLPs
/// (two tanh hidden layers each). Run with zeroed latent segments it is the
/// independent-PPO baseline.
class PpoController {
  public:
    PpoController(const PpoConfig& cfg, std::mt19937_64& init_rng);

    ActionChoice select_action(const std::vector<double>& input, std::mt19937_64& rng,
                               bool greedy) const;
    std::vector<double> action_probabilities(const std::vector<double>& input) const;
    double value_of(const std::vector<double>& input) const;

    /// E epochs of minibatched clipped-surrogate + value + entropy updates.
    /// Throws NumericsError on a non-finite loss (update aborted).
    UpdateStats update(const std::vector<Transition>& rollout, double bootstrap,
                       std::mt19937_64& shuffle_rng);

    /// One minibatch of the PPO objective as a graph (shared with update()).
    struct MinibatchView {
        num::Tensor inputs;      // [B x input_dim]
        std::vector<int> actions;
        num::Tensor old_log_probs;  // [B]
        num::Tensor advantages;     // [B], already normalised
        num::Tensor returns;        // [B]
    };
    struct LossParts {
        num::Var total, policy, value, entropy, ratio;
    };
    LossParts minibatch_loss(const MinibatchView& mb) const;

    std::vector<num::Var> parameters() const;
    void save(num::Checkpoint& ckpt, const std::string& prefix) const;
    void load(const num::Checkpoint& ckpt, const std::string& prefix);
    const PpoConfig& config() const { return cfg_; }

    std::vector<num::Var> actor_parameters() const;
    std::vector<num::Var> critic_parameters() const;

  private:
    num::Var actor_logits_rows(const num::Var& x) const;
    num::Var critic_rows(const num::Var& x) const;

    PpoConfig cfg_;
    num::LinearParams a1_, a2_, a_head_;
    num::LinearParams c1_, c2_, c_head_;
    // separate optimizers so the critic's large early gradients cannot eat
    // the shared clip budget and stall the actor
    std::unique_ptr<num::Adam> opt_actor_;
    std::unique_ptr<num::Adam> opt_critic_;
};

}  // namespace iplan::agent
