#include "iplan/train/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "iplan/rng.hpp"

namespace iplan::train {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void append_line(const std::string& path, const std::string& line) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw Error("cannot append to " + path);
    out << line << '\n';
}

}  // namespace

std::string RunManifest::serialize() const {
    std::ostringstream os;
    os << "iplan-run-manifest 1\n";
    os << "code_version " << code_version << '\n';
    os << "config_hash " << config_hash << '\n';
    os << "modules ppo";
    if (config.use_behavior_module()) os << ",behavior";
    if (config.use_instant_module()) os << ",instant";
    os << '\n';
    os << "begin-config\n" << config.serialize() << "end-config\n";
    for (const auto& [name, seed] : stream_seeds) os << "stream " << name << ' ' << seed << '\n';
    return os.str();
}

Trainer::Trainer(const RunConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    env_ = env::make_env(cfg_);
    int n = env_->num_agents();
    agents_.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        agents_.emplace_back(cfg_, i, env_->obs_capacity(), cfg_.seed);
    rollouts_.assign(static_cast<size_t>(n), {});
    stores_.assign(static_cast<size_t>(n), {});
}

RunManifest Trainer::manifest() const {
    RunManifest m;
    m.config = cfg_;
    m.config_hash = cfg_.hash();
    for (int i = 0; i < env_->num_agents(); ++i) {
        uint64_t a = static_cast<uint64_t>(i);
        m.stream_seeds.emplace_back("policy/" + std::to_string(i),
                                    mix_seed({cfg_.seed, hash_str("policy"), a, 0}));
        m.stream_seeds.emplace_back("dropout/" + std::to_string(i),
                                    mix_seed({cfg_.seed, hash_str("dropout"), a, 0}));
        m.stream_seeds.emplace_back("init/" + std::to_string(i),
                                    mix_seed({cfg_.seed, hash_str("init"), a, 0}));
    }
    m.stream_seeds.emplace_back("env/0", mix_seed({cfg_.seed, hash_str("env"), 0, 0}));
    m.stream_seeds.emplace_back("eval/0", mix_seed({cfg_.seed, hash_str("eval"), 0, 0}));
    return m;
}

Trainer::EpisodeOutcome Trainer::run_episode(env::Environment& env, uint64_t episode_seed,
                                             bool training, bool collect_latents) {
    int n = env.num_agents();
    std::vector<env::Observation> obs = env.reset(episode_seed);
    for (auto& ag : agents_) ag.episode_reset();

    EpisodeOutcome out;
    out.rewards.assign(static_cast<size_t>(n), 0.0);
    out.records.resize(static_cast<size_t>(n));
    out.log.config = cfg_;
    out.log.episode_seed = episode_seed;
    for (int i = 0; i < n; ++i) out.records[static_cast<size_t>(i)].agent_id = i;
    for (int i = 0; i < n; ++i) out.records[static_cast<size_t>(i)].seed = episode_seed;

    std::vector<bool> alive(static_cast<size_t>(n), true);
    const int horizon = env.horizon();

    for (int t = 0; t < horizon && !env.episode_done(); ++t) {
        std::vector<agent::AgentRuntime::PreparedTick> preps(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
            if (alive[static_cast<size_t>(i)])
                preps[static_cast<size_t>(i)] = agents_[static_cast<size_t>(i)].prepare(
                    obs[static_cast<size_t>(i)], t);

        if (training) {
            for (int i = 0; i < n; ++i) {
                if (!alive[static_cast<size_t>(i)]) continue;
                if (static_cast<int>(rollouts_[static_cast<size_t>(i)].size()) >= cfg_.rollout_size) {
                    double bootstrap = agents_[static_cast<size_t>(i)].ppo().value_of(
                        preps[static_cast<size_t>(i)].policy_input);
                    gradient_phase(i, bootstrap);
                }
            }
        }

        std::vector<int> actions(static_cast<size_t>(n), 1);  // idle for done agents
        std::vector<agent::ActionChoice> choices(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            if (!alive[static_cast<size_t>(i)]) continue;
            choices[static_cast<size_t>(i)] =
                agents_[static_cast<size_t>(i)].choose(preps[static_cast<size_t>(i)], !training);
            actions[static_cast<size_t>(i)] = choices[static_cast<size_t>(i)].action;
        }

        env::StepResult res = env.step(actions);
        auto states = env.entity_states();
        if (training) ++total_steps_;  // evaluation episodes don't consume budget

        for (int i = 0; i < n; ++i) {
            const env::AgentStep& step = res.agents[static_cast<size_t>(i)];
            // persistent log row for every agent every tick
            env::EpisodeLog::Row row;
            row.tick = res.tick;
            row.agent = i;
            row.action = actions[static_cast<size_t>(i)];
            row.reward = step.reward;
            row.done = step.done ? 1 : 0;
            row.collided = step.collided ? 1 : 0;
            row.speed = step.speed;
            row.lane = step.lane;
            row.px = states[static_cast<size_t>(i)].px;
            row.py = states[static_cast<size_t>(i)].py;
            row.vx = states[static_cast<size_t>(i)].vx;
            row.vy = states[static_cast<size_t>(i)].vy;
            out.log.rows.push_back(row);

            if (!alive[static_cast<size_t>(i)]) continue;
            out.rewards[static_cast<size_t>(i)] += step.reward;

            env::TickRecord rec;
            rec.obs = obs[static_cast<size_t>(i)];
            rec.action = actions[static_cast<size_t>(i)];
            rec.reward = step.reward;
            rec.done = step.done;
            rec.collided = step.collided;
            rec.speed = step.speed;
            rec.lane = step.lane;
            for (const auto& [id, b] : preps[static_cast<size_t>(i)].beta) rec.beta[id] = b;
            rec.zeta = preps[static_cast<size_t>(i)].zeta;
            out.records[static_cast<size_t>(i)].ticks.push_back(std::move(rec));

            if (collect_latents) {
                std::ostringstream ls;
                ls << res.tick - 1 << ',' << i << ",zeta";
                for (double z : preps[static_cast<size_t>(i)].zeta) ls << ',' << fmt(z);
                out.log.latent_lines.push_back(ls.str());
                for (const auto& [id, b] : preps[static_cast<size_t>(i)].beta) {
                    std::ostringstream bs;
                    bs << res.tick - 1 << ',' << i << ",beta," << id;
                    for (double v : b) bs << ',' << fmt(v);
                    out.log.latent_lines.push_back(bs.str());
                }
                const num::Tensor& attn = preps[static_cast<size_t>(i)].attention;
                if (attn.size() > 0) {
                    std::ostringstream as;
                    as << res.tick - 1 << ',' << i << ",attn," << attn.dim(0);
                    for (int64_t k = 0; k < attn.size(); ++k) as << ',' << fmt(attn[k]);
                    out.log.latent_lines.push_back(as.str());
                }
            }

            if (training) {
                agent::Transition tr;
                tr.input = preps[static_cast<size_t>(i)].policy_input;
                tr.action = actions[static_cast<size_t>(i)];
                tr.log_prob = choices[static_cast<size_t>(i)].log_prob;
                tr.reward = step.reward;
                tr.value = choices[static_cast<size_t>(i)].value;
                tr.done = step.done;
                rollouts_[static_cast<size_t>(i)].push_back(std::move(tr));
            }
            if (step.done) alive[static_cast<size_t>(i)] = false;
        }
        for (int i = 0; i < n; ++i) obs[static_cast<size_t>(i)] = res.agents[static_cast<size_t>(i)].obs;
    }
    return out;
}

void Trainer::gradient_phase(int agent_idx, double bootstrap_value) {
    agent::AgentRuntime& ag = agents_[static_cast<size_t>(agent_idx)];
    auto& rollout = rollouts_[static_cast<size_t>(agent_idx)];
    double policy_loss = 0, value_loss = 0, entropy = 0, clip_fraction = 0;
    double behavior_loss = std::nan(""), instant_loss = std::nan("");

    try {
        agent::UpdateStats stats = ag.ppo().update(rollout, bootstrap_value, ag.sample_rng());
        policy_loss = stats.policy_loss;
        value_loss = stats.value_loss;
        entropy = stats.entropy;
        clip_fraction = stats.clip_fraction;
    } catch (const NumericsError& e) {
        ++aborted_updates_;
        std::cerr << "[trainer] agent " << agent_idx << ": ppo update skipped: " << e.what()
                  << '\n';
    }
    rollout.clear();

    // sample K experiences from the retained episode store
    auto& store = stores_[static_cast<size_t>(agent_idx)];
    if (!store.empty()) {
        std::vector<const env::EpisodeRecord*> sample;
        std::vector<int> idx(store.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), ag.sample_rng());
        int k = std::min<int>(cfg_.experiences_k, static_cast<int>(store.size()));
        for (int i = 0; i < k; ++i)
            sample.push_back(&store[static_cast<size_t>(idx[static_cast<size_t>(i)])]);

        if (ag.behavior()) {
            try {
                auto res = ag.behavior()->train_step(sample, ag.dropout_rng());
                if (res) behavior_loss = res->loss;
            } catch (const NumericsError& e) {
                ++aborted_updates_;
                std::cerr << "[trainer] agent " << agent_idx
                          << ": behavior update skipped: " << e.what() << '\n';
            }
        }
        if (ag.instant()) {
            try {
                auto res = ag.instant()->train_step(sample, ag.dropout_rng());
                if (res) instant_loss = res->loss;
            } catch (const NumericsError& e) {
                ++aborted_updates_;
                std::cerr << "[trainer] agent " << agent_idx
                          << ": instant update skipped: " << e.what() << '\n';
            }
        }
    }
    if (files_open_)
        write_stats_row(agent_idx, policy_loss, value_loss, entropy, clip_fraction, behavior_loss,
                        instant_loss);
}

void Trainer::write_stats_row(int agent_idx, double policy_loss, double value_loss, double entropy,
                              double clip_fraction, double behavior_loss, double instant_loss) {
    std::ostringstream os;
    os << total_steps_ << ',' << agent_idx << ',' << fmt(policy_loss) << ',' << fmt(value_loss)
       << ',' << fmt(entropy) << ',' << fmt(clip_fraction) << ','
       << (std::isnan(behavior_loss) ? "" : fmt(behavior_loss)) << ','
       << (std::isnan(instant_loss) ? "" : fmt(instant_loss));
    append_line(stats_path_, os.str());
}

EvalOutcome Trainer::evaluate(int n_episodes, uint64_t eval_seed) {
    auto eval_env = env::make_env(cfg_);
    EvalOutcome out;
    for (int ep = 0; ep < n_episodes; ++ep) {
        uint64_t seed = mix_seed({eval_seed, hash_str("eval-episode"), static_cast<uint64_t>(ep)});
        EpisodeOutcome res = run_episode(*eval_env, seed, /*training=*/false,
                                         /*collect_latents=*/cfg_.log_latents != 0);
        out.logs.push_back(std::move(res.log));
    }
    out.row = metrics::summarize(out.logs, cfg_.algo, cfg_.env, cfg_.scenario);
    return out;
}

void Trainer::save_checkpoint_file(const std::string& path) const {
    num::Checkpoint ckpt;
    ckpt.meta["code_version"] = "iplan-1";
    ckpt.meta["algo"] = cfg_.algo;
    ckpt.meta["env"] = cfg_.env;
    ckpt.meta["scenario"] = cfg_.scenario;
    ckpt.meta["steps"] = std::to_string(total_steps_);
    ckpt.meta["config"] = encode_text(cfg_.serialize());
    ckpt.meta["config_hash"] = std::to_string(cfg_.hash());
    for (const auto& ag : agents_) ag.save(ckpt);
    num::save_checkpoint(path, ckpt);
}

void Trainer::load_checkpoint_file(const std::string& path) {
    num::Checkpoint ckpt = num::load_checkpoint(path);
    auto it = ckpt.meta.find("config_hash");
    if (it != ckpt.meta.end() && it->second != std::to_string(cfg_.hash()))
        throw CheckpointVersionError("checkpoint config does not match trainer config");
    for (auto& ag : agents_) ag.load(ckpt);
}

std::unique_ptr<Trainer> Trainer::from_checkpoint(const std::string& path) {
    num::Checkpoint ckpt = num::load_checkpoint(path);
    auto it = ckpt.meta.find("config");
    if (it == ckpt.meta.end())
        throw CheckpointVersionError("checkpoint has no embedded config: " + path);
    RunConfig cfg = RunConfig::from_keyvalues(parse_keyvalues(decode_text(it->second)));
    auto trainer = std::make_unique<Trainer>(cfg);
    for (auto& ag : trainer->agents_) ag.load(ckpt);
    return trainer;
}

std::string Trainer::run() {
    namespace fs = std::filesystem;
    fs::create_directories(cfg_.out_dir);
    stats_path_ = cfg_.out_dir + "/train_stats.csv";
    rewards_path_ = cfg_.out_dir + "/rewards.csv";
    eval_path_ = cfg_.out_dir + "/eval.csv";
    train_log_path_ = cfg_.out_dir + "/train_episodes.log";

    {
        std::ofstream mf(cfg_.out_dir + "/manifest.txt");
        mf << manifest().serialize();
    }
    std::ofstream(stats_path_)
        << "step,agent,policy_loss,value_loss,entropy,clip_fraction,behavior_loss,instant_loss\n";
    std::ofstream(rewards_path_) << "episode,end_step,agent,reward\n";
    std::ofstream(eval_path_) << "step," << metrics::metric_csv_header() << '\n';
    std::ofstream truncate_train_log(train_log_path_);
    truncate_train_log.close();
    files_open_ = true;

    int64_t next_eval = cfg_.eval_every;
    while (total_steps_ < cfg_.total_steps) {
        uint64_t ep_seed = mix_seed({cfg_.seed, hash_str("env"), static_cast<uint64_t>(episode_index_)});
        EpisodeOutcome out = run_episode(*env_, ep_seed, /*training=*/true,
                                         /*collect_latents=*/false);
        for (int i = 0; i < env_->num_agents(); ++i) {
            append_line(rewards_path_, std::to_string(episode_index_) + ',' +
                                           std::to_string(total_steps_) + ',' + std::to_string(i) +
                                           ',' + fmt(out.rewards[static_cast<size_t>(i)]));
            auto& store = stores_[static_cast<size_t>(i)];
            store.push_back(std::move(out.records[static_cast<size_t>(i)]));
            while (static_cast<int>(store.size()) > cfg_.episode_store) store.pop_front();
        }
        if (cfg_.log_train_episodes) env::append_episode_log(train_log_path_, out.log);
        ++episode_index_;

        if (total_steps_ >= next_eval || total_steps_ >= cfg_.total_steps) {
            std::string ckpt_path = cfg_.out_dir + "/ckpt_" + std::to_string(total_steps_) + ".txt";
            save_checkpoint_file(ckpt_path);
            uint64_t eval_seed = mix_seed({cfg_.seed, hash_str("eval"),
                                           static_cast<uint64_t>(next_eval)});
            EvalOutcome ev = evaluate(cfg_.eval_episodes, eval_seed);
            append_line(eval_path_, std::to_string(total_steps_) + ',' +
                                        metrics::metric_csv_row(ev.row));
            std::string eval_log_path =
                cfg_.out_dir + "/eval_" + std::to_string(total_steps_) + ".log";
            std::ofstream truncate_eval_log(eval_log_path);
            truncate_eval_log.close();
            for (const auto& log : ev.logs) env::append_episode_log(eval_log_path, log);
            while (next_eval <= total_steps_) next_eval += cfg_.eval_every;
        }
    }

    std::string final_path = cfg_.out_dir + "/ckpt_final.txt";
    save_checkpoint_file(final_path);
    files_open_ = false;
    return final_path;
}

}  // namespace iplan::train
