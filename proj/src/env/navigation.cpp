#include "iplan/env/navigation.hpp"

#include <algorithm>
#include <cmath>

namespace iplan::env {

namespace {
constexpr double kLandmarkScope = 0.1;   // rewarding scope radius
constexpr double kCollisionPenalty = -5.0;
constexpr double kLandmarkBonus = 10.0;
constexpr double kTeamBonus = 100.0;
constexpr int kSpawnRetries = 100;
}  // namespace

NavAgentProfile NavAgentProfile::of(NavKind kind) {
    switch (kind) {
        case NavKind::Normal: return {kind, 0.08, 1.0, true};
        case NavKind::Tiny:   return {kind, 0.06, 1.1, true};
        case NavKind::Bulky:  return {kind, 0.10, 0.9, true};
        case NavKind::Random: return {kind, 0.08, 1.0, false};
    }
    throw EnvError("unknown nav agent kind");
}

NavBody nav_dynamics(const NavBody& state, NavAction action, const NavAgentProfile& profile,
                     double dt, double damping) {
    double fx = 0.0, fy = 0.0;
    switch (action) {
        case NavAction::Idle: break;
        case NavAction::Up: fy = 1.0; break;
        case NavAction::Down: fy = -1.0; break;
        case NavAction::Left: fx = -1.0; break;
        case NavAction::Right: fx = 1.0; break;
    }
    NavBody next = state;
    next.vx = (1.0 - damping) * state.vx + fx * profile.acceleration * dt;
    next.vy = (1.0 - damping) * state.vy + fy * profile.acceleration * dt;
    next.px = state.px + next.vx * dt;
    next.py = state.py + next.vy * dt;
    return next;
}

bool nav_collision(double ax, double ay, double size_a, double bx, double by, double size_b) {
    double dx = ax - bx, dy = ay - by;
    return std::sqrt(dx * dx + dy * dy) < size_a + size_b;
}

NavAction random_agent_policy(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> d(0, 4);
    return static_cast<NavAction>(d(rng));
}

NavigationEnv::NavigationEnv(const RunConfig& cfg)
    : scenario_(cfg.scenario),
      horizon_(cfg.horizon_resolved()),
      dt_(cfg.nav_dt),
      damping_(cfg.nav_damping) {
    std::vector<NavKind> kinds = {NavKind::Normal, NavKind::Tiny, NavKind::Bulky};
    if (scenario_ == "hard") kinds.push_back(NavKind::Random);
    for (NavKind k : kinds) profiles_.push_back(NavAgentProfile::of(k));
    n_controllable_ = 0;
    for (const auto& p : profiles_)
        if (p.controllable) ++n_controllable_;
    landmarks_.assign(static_cast<size_t>(n_controllable_), {0.0, 0.0});
    agents_.assign(profiles_.size(), NavBody{});
    collisions_.assign(profiles_.size(), 0);
}

int NavigationEnv::obs_capacity() const {
    return static_cast<int>(profiles_.size()) - 1 + static_cast<int>(landmarks_.size());
}

std::vector<Observation> NavigationEnv::reset(uint64_t seed) {
    rng_ = std::mt19937_64(seed);
    tick_ = 0;
    std::fill(collisions_.begin(), collisions_.end(), 0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    for (size_t i = 0; i < agents_.size(); ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kSpawnRetries && !placed; ++attempt) {
            double px = u(rng_), py = u(rng_);
            placed = true;
            for (size_t j = 0; j < i; ++j) {
                if (nav_collision(px, py, profiles_[i].size, agents_[j].px, agents_[j].py,
                                  profiles_[j].size)) {
                    placed = false;
                    break;
                }
            }
            if (placed) agents_[i] = {px, py, 0.0, 0.0};
        }
        if (!placed) throw EnvError("navigation: infeasible spawn after retries");
    }
    for (auto& lm : landmarks_) lm = {u(rng_), u(rng_)};

    std::vector<Observation> obs;
    obs.reserve(static_cast<size_t>(n_controllable_));
    for (int i = 0; i < n_controllable_; ++i) obs.push_back(observe(i));
    return obs;
}

StepResult NavigationEnv::step(const std::vector<int>& actions) {
    if (static_cast<int>(actions.size()) != n_controllable_)
        throw EnvError("navigation: expected one action per controllable agent");
    if (episode_done()) throw EnvError("navigation: step past horizon");

    for (size_t i = 0; i < agents_.size(); ++i) {
        NavAction a;
        if (profiles_[i].controllable) {
            int raw = actions[i];
            if (raw < 0 || raw > 4) throw EnvError("navigation: action out of range");
            a = static_cast<NavAction>(raw);
        } else {
            a = random_agent_policy(rng_);
        }
        agents_[i] = nav_dynamics(agents_[i], a, profiles_[i], dt_, damping_);
    }

    std::fill(collisions_.begin(), collisions_.end(), 0);
    for (size_t i = 0; i < agents_.size(); ++i)
        for (size_t j = i + 1; j < agents_.size(); ++j)
            if (nav_collision(agents_[i].px, agents_[i].py, profiles_[i].size, agents_[j].px,
                              agents_[j].py, profiles_[j].size)) {
                ++collisions_[i];
                ++collisions_[j];
            }

    bool all_in_scope = true;
    for (int i = 0; i < n_controllable_; ++i)
        if (closest_landmark_distance(i) >= kLandmarkScope || collisions_[static_cast<size_t>(i)] > 0)
            all_in_scope = false;

    ++tick_;
    StepResult res;
    res.tick = tick_;
    res.episode_done = episode_done();
    res.agents.resize(static_cast<size_t>(n_controllable_));
    for (int i = 0; i < n_controllable_; ++i) {
        AgentStep& s = res.agents[static_cast<size_t>(i)];
        s.obs = observe(i);
        s.reward = reward_for(i, all_in_scope);
        s.done = res.episode_done;
        s.collided = collisions_[static_cast<size_t>(i)] > 0;
        s.speed = std::hypot(agents_[static_cast<size_t>(i)].vx, agents_[static_cast<size_t>(i)].vy);
    }
    return res;
}

double NavigationEnv::closest_landmark_distance(int agent_idx) const {
    const NavBody& a = agents_[static_cast<size_t>(agent_idx)];
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [lx, ly] : landmarks_)
        best = std::min(best, std::hypot(a.px - lx, a.py - ly));
    return best;
}

double NavigationEnv::reward_for(int agent_idx, bool team_bonus) const {
    double r = -closest_landmark_distance(agent_idx);
    r += kCollisionPenalty * collisions_[static_cast<size_t>(agent_idx)];
    if (closest_landmark_distance(agent_idx) < kLandmarkScope) r += kLandmarkBonus;
    if (team_bonus && profiles_[static_cast<size_t>(agent_idx)].controllable) r += kTeamBonus;
    return r;
}

Observation NavigationEnv::observe(int agent_id) const {
    if (agent_id < 0 || agent_id >= static_cast<int>(agents_.size()))
        throw EnvError("navigation: unknown agent id");
    const NavBody& ego = agents_[static_cast<size_t>(agent_id)];

    Observation obs;
    obs.ego = {agent_id, ego.px, ego.py, ego.vx, ego.vy};

    struct Cand {
        double dist;
        EntityState st;
    };
    std::vector<Cand> cands;
    for (size_t j = 0; j < agents_.size(); ++j) {
        if (static_cast<int>(j) == agent_id) continue;
        EntityState st{static_cast<int>(j), agents_[j].px - ego.px, agents_[j].py - ego.py,
                       agents_[j].vx, agents_[j].vy};
        cands.push_back({std::hypot(st.px, st.py), st});
    }
    int lm_id = static_cast<int>(agents_.size());
    for (const auto& [lx, ly] : landmarks_) {
        EntityState st{lm_id++, lx - ego.px, ly - ego.py, 0.0, 0.0};
        cands.push_back({std::hypot(st.px, st.py), st});
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        return a.st.id < b.st.id;
    });

    int cap = obs_capacity();
    obs.neighbors.assign(static_cast<size_t>(cap), EntityState{});
    obs.present.assign(static_cast<size_t>(cap), false);
    for (int s = 0; s < cap && s < static_cast<int>(cands.size()); ++s) {
        obs.neighbors[static_cast<size_t>(s)] = cands[static_cast<size_t>(s)].st;
        obs.present[static_cast<size_t>(s)] = true;
    }
    return obs;
}

std::vector<EntityState> NavigationEnv::entity_states() const {
    std::vector<EntityState> out;
    for (size_t i = 0; i < agents_.size(); ++i)
        out.push_back({static_cast<int>(i), agents_[i].px, agents_[i].py, agents_[i].vx,
                       agents_[i].vy});
    int lm_id = static_cast<int>(agents_.size());
    for (const auto& [lx, ly] : landmarks_) out.push_back({lm_id++, lx, ly, 0.0, 0.0});
    return out;
}

}  // namespace iplan::env
