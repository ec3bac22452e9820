#include "iplan/agent/runtime.hpp"

#include "iplan/rng.hpp"

namespace iplan::agent {

AgentRuntime::AgentRuntime(const RunConfig& cfg, int agent_id, int obs_capacity,
                           uint64_t master_seed)
    : cfg_(cfg),
      agent_id_(agent_id),
      capacity_(obs_capacity),
      input_dim_(policy_input_dim(obs_capacity, cfg.zeta_dim)),
      scales_(FeatureScales::for_env(cfg)),
      history_(cfg.t_h_resolved()),
      policy_rng_(make_rng(master_seed, "policy", static_cast<uint64_t>(agent_id))),
      dropout_rng_(make_rng(master_seed, "dropout", static_cast<uint64_t>(agent_id))),
      sample_rng_(make_rng(master_seed, "sample", static_cast<uint64_t>(agent_id))) {
    auto init_rng = make_rng(master_seed, "init", static_cast<uint64_t>(agent_id));

    PpoConfig pc;
    pc.input_dim = input_dim_;
    pc.hidden = cfg.ppo_hidden;
    pc.lr = cfg.lr_ppo;
    pc.rollout_size = cfg.rollout_size;
    pc.gamma = cfg.gamma;
    pc.gae_lambda = cfg.gae_lambda;
    pc.clip_eps = cfg.clip_eps;
    pc.entropy_coef = cfg.entropy_coef;
    pc.value_coef = cfg.value_coef;
    pc.epochs = cfg.ppo_epochs;
    pc.minibatch = cfg.minibatch;
    pc.grad_clip = cfg.grad_clip;
    ppo_ = std::make_unique<PpoController>(pc, init_rng);

    if (cfg.use_behavior_module()) {
        BehaviorConfig bc;
        bc.window = cfg.t_h_resolved();
        bc.enc_hidden = cfg.behavior_enc_hidden;
        bc.dec_hidden = cfg.behavior_dec_hidden;
        bc.eta = cfg.eta;
        bc.hard_mode = cfg.beta_update == "hard";
        bc.hard_interval = cfg.hard_interval;
        bc.dropout = cfg.dropout;
        bc.lr = cfg.lr_behavior;
        bc.grad_clip = cfg.grad_clip;
        behavior_ = std::make_unique<BehaviorModule>(bc, init_rng);
        behavior_->set_feature_scales(scales_);
    }
    if (cfg.use_instant_module()) {
        InstantConfig ic;
        ic.capacity = obs_capacity;
        ic.gat_hidden = cfg.gat_hidden;
        ic.zeta_dim = cfg.zeta_dim;
        ic.dec_hidden = cfg.instant_dec_hidden;
        ic.t_p = cfg.t_p_resolved();
        ic.dropout = cfg.dropout;
        ic.lr = cfg.lr_instant;
        ic.grad_clip = cfg.grad_clip;
        instant_ = std::make_unique<InstantModule>(ic, init_rng);
        instant_->set_feature_scales(scales_);
    }
    episode_reset();
}

void AgentRuntime::episode_reset() {
    history_.clear();
    beta_.clear();
    zeta_.assign(static_cast<size_t>(cfg_.zeta_dim), 0.0);
}

AgentRuntime::PreparedTick AgentRuntime::prepare(const env::Observation& obs, int tick) {
    // gather current and historical observations
    history_.record(tick, obs.ego);
    for (int s = 0; s < obs.capacity(); ++s)
        if (obs.present[static_cast<size_t>(s)])
            history_.record(tick, obs.neighbors[static_cast<size_t>(s)]);

    // behavioral incentives first
    if (behavior_) {
        for (int id : history_.tracked_ids()) {
            auto win = history_.window_at(id, tick);
            FeatureWindow fw;
            fw.valid = win.valid;
            fw.states.resize(win.states.size());
            bool is_ego = id == obs.ego.id;
            for (size_t k = 0; k < win.states.size(); ++k)
                fw.states[k] = win.valid[k] ? entity_features(win.states[k], is_ego, scales_)
                                            : StateFeature{};
            BetaVec prev{};
            if (auto it = beta_.find(id); it != beta_.end()) prev = it->second;
            beta_[id] = behavior_->encode(fw, prev, tick);
        }
    }

    PreparedTick out;
    // then the instant incentive
    if (instant_) {
        auto enc = instant_->encode(obs, beta_, zeta_);
        zeta_ = std::move(enc.zeta);
        out.attention = std::move(enc.attention);
    }

    out.policy_input = policy_input(obs, scales_, beta_, zeta_, cfg_.zeta_dim);
    out.beta = beta_;
    out.zeta = zeta_;
    return out;
}

std::vector<num::Var> AgentRuntime::all_parameters() const {
    std::vector<num::Var> out = ppo_->parameters();
    if (behavior_) {
        auto p = behavior_->parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    if (instant_) {
        auto p = instant_->parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

void AgentRuntime::save(num::Checkpoint& ckpt) const {
    ppo_->save(ckpt, prefix() + "/ppo");
    if (behavior_) behavior_->save(ckpt, prefix() + "/behavior");
    if (instant_) instant_->save(ckpt, prefix() + "/instant");
}

void AgentRuntime::load(const num::Checkpoint& ckpt) {
    ppo_->load(ckpt, prefix() + "/ppo");
    if (behavior_) behavior_->load(ckpt, prefix() + "/behavior");
    if (instant_) instant_->load(ckpt, prefix() + "/instant");
}

}  // namespace iplan::agent
