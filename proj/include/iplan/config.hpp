#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "iplan/error.hpp"

namespace iplan {

/// Resolved run configuration. Defaults carry every fixed choice of the
/// artifact so a config file only needs to name what it overrides.
struct RunConfig {
    // run identity
    std::string env = "navigation";  // navigation | highway
    std::string scenario = "easy";   // easy|hard or mild|chaotic|chaotic-vh
    std::string algo = "iplan";      // iplan | iplan-bm | iplan-gat | ippo
    uint64_t seed = 1;
    int64_t total_steps = 200000;
    std::string out_dir = "out";

    // episode horizon; -1 resolves to the per-environment default (50 / 90)
    int horizon = -1;

    // navigation dynamics (damped double integrator)
    double nav_dt = 0.1;
    double nav_damping = 0.25;

    // highway geometry and control
    int hw_lanes = 8;
    double hw_lane_width = 4.0;
    int hw_n_controlled = 5;
    int hw_n_behavior = 50;
    double hw_density = 1.0;
    int hw_substeps = 15;  // physics substeps per decision step (1 Hz policy)
    double hw_vehicle_length = 5.0;
    double hw_vehicle_width = 2.0;
    double hw_speed_delta = 5.0;  // faster/slower target-speed change
    double hw_ego_max_speed = 40.0;
    double hw_ego_max_accel = 6.0;
    double hw_ego_init_speed = 25.0;
    double hw_mobil_threshold = 0.2;
    double hw_spawn_spacing = 10.0;  // mean exponential headway at density 1

    // incentive inference; -1 resolves per environment (t_h 5/10, t_p 2/5)
    int t_h = -1;
    int t_p = -1;
    double eta = 0.1;               // soft-update coefficient
    std::string beta_update = "soft";  // soft | hard
    int hard_interval = 10;
    double lr_behavior = 1e-4;
    double lr_instant = 2e-5;
    double dropout = 0.1;
    int beta_dim = 8;
    int behavior_enc_hidden = 32;
    int behavior_dec_hidden = 64;
    int gat_hidden = 32;
    int zeta_dim = 32;
    int instant_dec_hidden = 32;

    // PPO controller
    double lr_ppo = 5e-4;
    int rollout_size = 256;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_eps = 0.2;
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    int ppo_epochs = 4;
    int minibatch = 64;
    double grad_clip = 0.5;
    int ppo_hidden = 64;

    // trainer
    int experiences_k = 4;  // experiences sampled per gradient phase
    int episode_store = 16;
    int64_t eval_every = 50000;
    int eval_episodes = 32;
    int log_train_episodes = 1;  // append training episodes to train_episodes.log
    int log_latents = 0;         // dump beta/zeta/attention lines into eval logs

    // --- resolution helpers ---
    bool is_highway() const { return env == "highway"; }
    int horizon_resolved() const { return horizon > 0 ? horizon : (is_highway() ? 90 : 50); }
    int t_h_resolved() const { return t_h > 0 ? t_h : (is_highway() ? 10 : 5); }
    int t_p_resolved() const { return t_p > 0 ? t_p : (is_highway() ? 5 : 2); }
    bool use_behavior_module() const { return algo == "iplan" || algo == "iplan-bm"; }
    bool use_instant_module() const { return algo == "iplan" || algo == "iplan-gat"; }

    void validate() const;

    /// Canonical key=value serialisation (fixed key order).
    std::string serialize() const;
    uint64_t hash() const;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_keyvalues(const std::map<std::string, std::string>& kv);
};

/// Parses `key = value` lines; '#' starts a comment. Unknown keys are errors.
std::map<std::string, std::string> parse_keyvalues(const std::string& text);

/// Percent-encoding for embedding multi-line text in single-token fields.
std::string encode_text(const std::string& s);
std::string decode_text(const std::string& s);

}  // namespace iplan
