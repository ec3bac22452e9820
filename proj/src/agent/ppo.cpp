#include "iplan/agent/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace iplan::agent {

using namespace iplan::num;

GaeResult compute_gae(const std::vector<Transition>& rollout, double gamma, double lambda,
                      double bootstrap) {
    int n = static_cast<int>(rollout.size());
    GaeResult out;
    out.advantages.assign(static_cast<size_t>(n), 0.0);
    out.returns.assign(static_cast<size_t>(n), 0.0);
    double gae = 0.0;
    for (int t = n - 1; t >= 0; --t) {
        const Transition& tr = rollout[static_cast<size_t>(t)];
        double next_value;
        double next_nonterminal = tr.done ? 0.0 : 1.0;
        if (t == n - 1)
            next_value = bootstrap;
        else
            next_value = rollout[static_cast<size_t>(t) + 1].value;
        double delta = tr.reward + gamma * next_value * next_nonterminal - tr.value;
        gae = delta + gamma * lambda * next_nonterminal * gae;
        out.advantages[static_cast<size_t>(t)] = gae;
        out.returns[static_cast<size_t>(t)] = gae + tr.value;
    }
    return out;
}

PpoController::PpoController(const PpoConfig& cfg, std::mt19937_64& init_rng) : cfg_(cfg) {
    a1_ = LinearParams::init(cfg_.input_dim, cfg_.hidden, init_rng);
    a2_ = LinearParams::init(cfg_.hidden, cfg_.hidden, init_rng);
    a_head_ = LinearParams::init(cfg_.hidden, cfg_.actions, init_rng);
    c1_ = LinearParams::init(cfg_.input_dim, cfg_.hidden, init_rng);
    c2_ = LinearParams::init(cfg_.hidden, cfg_.hidden, init_rng);
    c_head_ = LinearParams::init(cfg_.hidden, 1, init_rng);
    AdamConfig opt_cfg{cfg_.lr, 0.9, 0.999, 1e-8, cfg_.grad_clip};
    opt_actor_ = std::make_unique<Adam>(actor_parameters(), opt_cfg);
    opt_critic_ = std::make_unique<Adam>(critic_parameters(), opt_cfg);
}

std::vector<Var> PpoController::actor_parameters() const {
    std::vector<Var> out;
    for (const auto& p : {a1_, a2_, a_head_}) {
        out.push_back(p.w);
        out.push_back(p.b);
    }
    return out;
}

std::vector<Var> PpoController::critic_parameters() const {
    std::vector<Var> out;
    for (const auto& p : {c1_, c2_, c_head_}) {
        out.push_back(p.w);
        out.push_back(p.b);
    }
    return out;
}

std::vector<Var> PpoController::parameters() const {
    std::vector<Var> out = actor_parameters();
    auto critic = critic_parameters();
    out.insert(out.end(), critic.begin(), critic.end());
    return out;
}

Var PpoController::actor_logits_rows(const Var& x) const {
    Var h = tanh_v(linear_rows(a1_, x));
    h = tanh_v(linear_rows(a2_, h));
    return linear_rows(a_head_, h);
}

Var PpoController::critic_rows(const Var& x) const {
    Var h = tanh_v(linear_rows(c1_, x));
    h = tanh_v(linear_rows(c2_, h));
    return linear_rows(c_head_, h);  // [B x 1]
}

std::vector<double> PpoController::action_probabilities(const std::vector<double>& input) const {
    NoGradGuard ng;
    Var x = constant(Tensor({1, cfg_.input_dim}, std::vector<double>(input)));
    Var logits = reshape(actor_logits_rows(x), {cfg_.actions});
    Var probs = softmax(logits);
    return probs->value.to_vector();
}

double PpoController::value_of(const std::vector<double>& input) const {
    NoGradGuard ng;
    Var x = constant(Tensor({1, cfg_.input_dim}, std::vector<double>(input)));
    return critic_rows(x)->value[0];
}

ActionChoice PpoController::select_action(const std::vector<double>& input, std::mt19937_64& rng,
                                          bool greedy) const {
    if (static_cast<int>(input.size()) != cfg_.input_dim)
        throw NumericsError("select_action: wrong input length");
    std::vector<double> probs = action_probabilities(input);
    for (double p : probs)
        if (!std::isfinite(p)) throw NumericsError("select_action: non-finite action logits");
    ActionChoice out;
    if (greedy) {
        out.action = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    } else {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double r = u(rng);
        double acc = 0.0;
        out.action = cfg_.actions - 1;
        for (int a = 0; a < cfg_.actions; ++a) {
            acc += probs[static_cast<size_t>(a)];
            if (r < acc) {
                out.action = a;
                break;
            }
        }
    }
    out.log_prob = std::log(std::max(probs[static_cast<size_t>(out.action)], 1e-300));
    out.value = value_of(input);
    return out;
}

PpoController::LossParts PpoController::minibatch_loss(const MinibatchView& mb) const {
    int b = mb.inputs.dim(0);
    Var xin = constant(mb.inputs);
    Var logp_rows = log_softmax_rows(actor_logits_rows(xin));
    Var new_logp = gather_rows(logp_rows, mb.actions);
    Var ratio = exp_v(sub(new_logp, constant(mb.old_log_probs)));

    Var adv_v = constant(mb.advantages);
    Var surr1 = mul(ratio, adv_v);
    Tensor lo_t({b}), hi_t({b});
    lo_t.fill(1.0 - cfg_.clip_eps);
    hi_t.fill(1.0 + cfg_.clip_eps);
    Var clipped = minimum(maximum(ratio, constant(lo_t)), constant(hi_t));
    Var surr2 = mul(clipped, adv_v);

    LossParts parts;
    parts.ratio = ratio;
    parts.policy = neg(mean(minimum(surr1, surr2)));
    Var values = reshape(critic_rows(xin), {b});
    Var verr = sub(values, constant(mb.returns));
    parts.value = mean(mul(verr, verr));
    Var probs = exp_v(logp_rows);
    parts.entropy = neg(mean(row_sum(mul(probs, logp_rows))));
    parts.total = add(parts.policy, sub(scale(parts.value, cfg_.value_coef),
                                        scale(parts.entropy, cfg_.entropy_coef)));
    return parts;
}

UpdateStats PpoController::update(const std::vector<Transition>& rollout, double bootstrap,
                                  std::mt19937_64& shuffle_rng) {
    if (rollout.empty()) throw NumericsError("ppo update on empty rollout");
    int n = static_cast<int>(rollout.size());
    GaeResult gae = compute_gae(rollout, cfg_.gamma, cfg_.gae_lambda, bootstrap);

    // advantages normalised to zero mean / unit variance over the batch
    double adv_mean = std::accumulate(gae.advantages.begin(), gae.advantages.end(), 0.0) / n;
    double var = 0.0;
    for (double a : gae.advantages) var += (a - adv_mean) * (a - adv_mean);
    double stddev = std::sqrt(var / n) + 1e-8;
    std::vector<double> adv(gae.advantages);
    for (double& a : adv) a = (a - adv_mean) / stddev;

    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    UpdateStats stats;
    int stat_batches = 0;
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (int start = 0; start < n; start += cfg_.minibatch) {
            int stop = std::min(n, start + cfg_.minibatch);
            int b = stop - start;

            MinibatchView mb;
            mb.inputs = Tensor({b, cfg_.input_dim});
            mb.advantages = Tensor({b});
            mb.returns = Tensor({b});
            mb.old_log_probs = Tensor({b});
            mb.actions.resize(static_cast<size_t>(b));
            for (int r = 0; r < b; ++r) {
                int i = order[static_cast<size_t>(start + r)];
                const Transition& tr = rollout[static_cast<size_t>(i)];
                std::copy(tr.input.begin(), tr.input.end(),
                          mb.inputs.data() + static_cast<size_t>(r) * cfg_.input_dim);
                mb.advantages[r] = adv[static_cast<size_t>(i)];
                mb.returns[r] = gae.returns[static_cast<size_t>(i)];
                mb.old_log_probs[r] = tr.log_prob;
                mb.actions[static_cast<size_t>(r)] = tr.action;
            }

            LossParts parts = minibatch_loss(mb);
            if (!std::isfinite(parts.total->value[0]))
                throw NumericsError("ppo update: non-finite loss, update aborted");

            num::zero_grad(parameters());
            num::backward(parts.total);
            opt_actor_->step();
            opt_critic_->step();

            stats.policy_loss += parts.policy->value[0];
            stats.value_loss += parts.value->value[0];
            stats.entropy += parts.entropy->value[0];
            int clipped_count = 0;
            for (int r = 0; r < b; ++r)
                if (std::abs(parts.ratio->value[r] - 1.0) > cfg_.clip_eps) ++clipped_count;
            stats.clip_fraction += static_cast<double>(clipped_count) / b;
            ++stat_batches;
        }
    }
    if (stat_batches > 0) {
        stats.policy_loss /= stat_batches;
        stats.value_loss /= stat_batches;
        stats.entropy /= stat_batches;
        stats.clip_fraction /= stat_batches;
    }
    return stats;
}

void PpoController::save(num::Checkpoint& ckpt, const std::string& prefix) const {
    const std::pair<const char*, const LinearParams*> layers[] = {
        {"/actor/l1", &a1_}, {"/actor/l2", &a2_}, {"/actor/head", &a_head_},
        {"/critic/l1", &c1_}, {"/critic/l2", &c2_}, {"/critic/head", &c_head_}};
    for (const auto& [name, p] : layers) {
        ckpt.add(prefix + name + "/w", p->w->value);
        ckpt.add(prefix + name + "/b", p->b->value);
    }
}

void PpoController::load(const num::Checkpoint& ckpt, const std::string& prefix) {
    const std::pair<const char*, const LinearParams*> layers[] = {
        {"/actor/l1", &a1_}, {"/actor/l2", &a2_}, {"/actor/head", &a_head_},
        {"/critic/l1", &c1_}, {"/critic/l2", &c2_}, {"/critic/head", &c_head_}};
    for (const auto& [name, p] : layers) {
        for (const char* part : {"/w", "/b"}) {
            const Tensor* t = ckpt.find(prefix + name + part);
            if (!t) throw Error("checkpoint missing tensor: " + prefix + name + part);
            const Var& v = std::string(part) == "/w" ? p->w : p->b;
            if (!t->same_shape(v->value))
                throw Error("checkpoint shape mismatch: " + prefix + name + part);
            v->value = *t;
        }
    }
}

}  // namespace iplan::agent
