#include "iplan/env/highway.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace iplan::env {

namespace {
constexpr double kIdmExponent = 4.0;
constexpr double kKpSpeed = 1.0 / 0.6;    // speed P-controller gain (1/s)
constexpr double kKpLateral = 1.0 / 0.6;  // lateral position gain (1/s)
constexpr double kKpHeading = 1.0 / 0.2;  // heading gain (1/s)
constexpr double kMaxHeadingCmd = M_PI / 4.0;
constexpr double kMaxSteering = M_PI / 3.0;
constexpr double kRewardSpeedLo = 20.0;
constexpr double kRewardSpeedHi = 30.0;
constexpr double kCrashPenalty = -1.0;
constexpr double kLaneRewardMax = 0.1;
constexpr double kSpeedRewardMax = 0.4;

double wrap_angle(double a) {
    while (a > M_PI) a -= 2.0 * M_PI;
    while (a < -M_PI) a += 2.0 * M_PI;
    return a;
}
}  // namespace

DriverProfile DriverProfile::of(DriverKind kind, double vehicle_length) {
    DriverProfile p;
    p.kind = kind;
    switch (kind) {
        case DriverKind::Normal:
            p.max_speed = 40.0;
            p.speed_range_lo = 23.0;
            p.speed_range_hi = 25.0;
            p.max_accel = 6.0;
            p.desired_accel = 3.0;
            p.desired_decel = -5.0;
            p.desired_front_distance = 5.0 + vehicle_length;
            p.time_wanted = 1.5;
            p.politeness = 0.3;
            break;
        case DriverKind::Aggressive:
            p.max_speed = 50.0;
            p.speed_range_lo = 35.0;
            p.speed_range_hi = 40.0;
            p.max_accel = 9.0;
            p.desired_accel = 6.0;
            p.desired_decel = -9.0;
            p.desired_front_distance = 0.5;
            p.time_wanted = 1.2;
            p.politeness = 0.0;
            break;
        case DriverKind::Conservative:
            p.max_speed = 40.0;
            p.speed_range_lo = 23.0;
            p.speed_range_hi = 25.0;
            p.max_accel = 5.0;
            p.desired_accel = 2.0;
            p.desired_decel = -4.0;
            p.desired_front_distance = 8.0 + vehicle_length;
            p.time_wanted = 1.8;
            p.politeness = 0.6;
            break;
    }
    return p;
}

double idm_acceleration(double v, double v_lead, double gap, const DriverProfile& p, double v0) {
    if (gap <= 0.0) return -p.max_accel;  // imminent collision: maximum braking
    double a = p.desired_accel;
    double b = std::abs(p.desired_decel);
    double speed_term = (v0 > 0.0) ? std::pow(v / v0, kIdmExponent) : 1.0;
    double s_star =
        p.desired_front_distance +
        std::max(0.0, v * p.time_wanted + v * (v - v_lead) / (2.0 * std::sqrt(a * b)));
    double gap_term = std::isinf(gap) ? 0.0 : (s_star / gap) * (s_star / gap);
    double accel = a * (1.0 - speed_term - gap_term);
    return std::clamp(accel, -p.max_accel, p.max_accel);
}

VehicleState bicycle_step(const VehicleState& state, double accel, double steering, double dt,
                          double max_speed) {
    VehicleState next = state;
    double slip = std::atan(0.5 * std::tan(steering));
    next.x = state.x + state.speed * std::cos(state.heading + slip) * dt;
    next.y = state.y + state.speed * std::sin(state.heading + slip) * dt;
    next.heading = state.heading + state.speed * std::sin(slip) / (state.length / 2.0) * dt;
    next.speed = std::clamp(state.speed + accel * dt, 0.0, max_speed);
    return next;
}

bool mobil_should_change(const MobilContext& ctx, double politeness, double safe_decel,
                         double threshold) {
    // safety first: neither the changer nor the new follower may be forced
    // below the comfortable braking limit
    if (ctx.new_follower_accel_after < -std::abs(safe_decel)) return false;
    if (ctx.ego_accel_after < -std::abs(safe_decel)) return false;
    double gain = (ctx.ego_accel_after - ctx.ego_accel_now) +
                  politeness * ((ctx.new_follower_accel_after - ctx.new_follower_accel_now) +
                                (ctx.old_follower_accel_after - ctx.old_follower_accel_now));
    return gain > threshold;
}

bool rect_overlap(double ax, double ay, double ah, double alen, double awid, double bx, double by,
                  double bh, double blen, double bwid) {
    struct Pt {
        double x, y;
    };
    auto corners = [](double cx, double cy, double h, double len, double wid) {
        double c = std::cos(h), s = std::sin(h);
        double hl = len / 2.0, hw = wid / 2.0;
        std::array<Pt, 4> out;
        const double dx[4] = {hl, hl, -hl, -hl};
        const double dy[4] = {hw, -hw, -hw, hw};
        for (int i = 0; i < 4; ++i)
            out[static_cast<size_t>(i)] = {cx + dx[i] * c - dy[i] * s, cy + dx[i] * s + dy[i] * c};
        return out;
    };
    auto ca = corners(ax, ay, ah, alen, awid);
    auto cb = corners(bx, by, bh, blen, bwid);
    const double axes[4][2] = {{std::cos(ah), std::sin(ah)},
                               {-std::sin(ah), std::cos(ah)},
                               {std::cos(bh), std::sin(bh)},
                               {-std::sin(bh), std::cos(bh)}};
    for (const auto& axis : axes) {
        double amin = std::numeric_limits<double>::infinity(), amax = -amin;
        double bmin = amin, bmax = -amin;
        for (const Pt& p : ca) {
            double d = p.x * axis[0] + p.y * axis[1];
            amin = std::min(amin, d);
            amax = std::max(amax, d);
        }
        for (const Pt& p : cb) {
            double d = p.x * axis[0] + p.y * axis[1];
            bmin = std::min(bmin, d);
            bmax = std::max(bmax, d);
        }
        if (amax <= bmin || bmax <= amin) return false;  // separating axis found
    }
    return true;
}

double lateral_steering(double y, double target_y, double heading, double speed,
                        double vehicle_length) {
    double v = std::max(speed, 1e-3);
    double lat_cmd = kKpLateral * (target_y - y);
    double heading_cmd = std::asin(std::clamp(lat_cmd / v, -1.0, 1.0));
    heading_cmd = std::clamp(heading_cmd, -kMaxHeadingCmd, kMaxHeadingCmd);
    double heading_rate = kKpHeading * wrap_angle(heading_cmd - heading);
    double slip = std::asin(std::clamp(heading_rate * (vehicle_length / 2.0) / v, -1.0, 1.0));
    return std::clamp(std::atan(2.0 * std::tan(slip)), -kMaxSteering, kMaxSteering);
}

HighwayEnv::HighwayEnv(const RunConfig& cfg)
    : scenario_(cfg.scenario),
      horizon_(cfg.horizon_resolved()),
      lanes_(cfg.hw_lanes),
      lane_width_(cfg.hw_lane_width),
      n_controlled_(cfg.hw_n_controlled),
      n_behavior_(cfg.hw_n_behavior),
      density_(cfg.hw_density),
      substeps_(cfg.hw_substeps),
      dt_(1.0 / cfg.hw_substeps),
      veh_length_(cfg.hw_vehicle_length),
      veh_width_(cfg.hw_vehicle_width),
      speed_delta_(cfg.hw_speed_delta),
      ego_max_speed_(cfg.hw_ego_max_speed),
      ego_max_accel_(cfg.hw_ego_max_accel),
      ego_init_speed_(cfg.hw_ego_init_speed),
      mobil_threshold_(cfg.hw_mobil_threshold),
      spawn_spacing_(cfg.hw_spawn_spacing) {
    if (scenario_ == "chaotic-vh") density_ *= 2.0;
}

int HighwayEnv::lane_of(double y) const {
    int lane = static_cast<int>(std::lround(y / lane_width_));
    return std::clamp(lane, 0, lanes_ - 1);
}

bool HighwayEnv::episode_done() const {
    if (tick_ >= horizon_) return true;
    for (int i = 0; i < n_controlled_; ++i)
        if (!vehicles_[static_cast<size_t>(i)].crashed) return false;
    return true;
}

std::vector<Observation> HighwayEnv::reset(uint64_t seed) {
    rng_ = std::mt19937_64(seed);
    tick_ = 0;

    // behavior kind list per scenario composition
    double frac_aggr = (scenario_ == "mild") ? 0.1 : 0.3;
    double frac_cons = (scenario_ == "mild") ? 0.1 : 0.3;
    int n_aggr = static_cast<int>(std::lround(frac_aggr * n_behavior_));
    int n_cons = static_cast<int>(std::lround(frac_cons * n_behavior_));
    int n_norm = n_behavior_ - n_aggr - n_cons;
    std::vector<DriverKind> kinds;
    kinds.insert(kinds.end(), static_cast<size_t>(n_norm), DriverKind::Normal);
    kinds.insert(kinds.end(), static_cast<size_t>(n_aggr), DriverKind::Aggressive);
    kinds.insert(kinds.end(), static_cast<size_t>(n_cons), DriverKind::Conservative);
    std::shuffle(kinds.begin(), kinds.end(), rng_);

    // platoon spawn order interleaves egos uniformly among behavior vehicles
    int total = n_controlled_ + n_behavior_;
    std::vector<bool> is_ego(static_cast<size_t>(total), false);
    for (int k = 0; k < n_controlled_; ++k) {
        int pos = static_cast<int>((k + 0.5) * total / n_controlled_);
        pos = std::clamp(pos, 0, total - 1);
        while (is_ego[static_cast<size_t>(pos)]) pos = (pos + 1) % total;
        is_ego[static_cast<size_t>(pos)] = true;
    }

    vehicles_.assign(static_cast<size_t>(total), VehicleState{});
    behavior_profiles_.clear();
    behavior_target_speed_.clear();
    behavior_target_lane_.assign(static_cast<size_t>(n_behavior_), 0);
    ego_control_.assign(static_cast<size_t>(n_controlled_), EgoControl{});
    crashed_this_tick_.assign(static_cast<size_t>(total), false);
    infeasible_flag_.assign(static_cast<size_t>(n_controlled_), false);
    speed_at_done_.assign(static_cast<size_t>(n_controlled_), 0.0);
    done_emitted_.assign(static_cast<size_t>(n_controlled_), false);

    std::uniform_int_distribution<int> lane_dist(0, lanes_ - 1);
    std::exponential_distribution<double> headway(density_ / spawn_spacing_);
    std::vector<double> last_x_in_lane(static_cast<size_t>(lanes_),
                                       -std::numeric_limits<double>::infinity());
    double x = 0.0;
    int ego_idx = 0, beh_idx = 0;
    for (int slot = 0; slot < total; ++slot) {
        x += headway(rng_);
        int lane = lane_dist(rng_);
        double min_x = last_x_in_lane[static_cast<size_t>(lane)] + 2.0 * veh_length_;
        double px = std::max(x, min_x);
        last_x_in_lane[static_cast<size_t>(lane)] = px;

        VehicleState v;
        v.lane = lane;
        v.x = px;
        v.y = lane_center(lane);
        v.heading = 0.0;
        v.length = veh_length_;
        if (is_ego[static_cast<size_t>(slot)]) {
            v.id = ego_idx;
            v.speed = ego_init_speed_;
            vehicles_[static_cast<size_t>(ego_idx)] = v;
            ego_control_[static_cast<size_t>(ego_idx)] = {ego_init_speed_, lane};
            ++ego_idx;
        } else {
            DriverProfile prof = DriverProfile::of(kinds[static_cast<size_t>(beh_idx)], veh_length_);
            std::uniform_real_distribution<double> v0(prof.speed_range_lo, prof.speed_range_hi);
            double target = v0(rng_);
            v.id = n_controlled_ + beh_idx;
            v.speed = std::min(target, prof.max_speed);
            vehicles_[static_cast<size_t>(v.id)] = v;
            behavior_profiles_.push_back(prof);
            behavior_target_speed_.push_back(target);
            behavior_target_lane_[static_cast<size_t>(beh_idx)] = lane;
            ++beh_idx;
        }
    }

    std::vector<Observation> obs;
    obs.reserve(static_cast<size_t>(n_controlled_));
    for (int i = 0; i < n_controlled_; ++i) obs.push_back(observe(i));
    return obs;
}

std::optional<int> HighwayEnv::leader_in_lane(int veh_idx, int lane) const {
    const VehicleState& me = vehicles_[static_cast<size_t>(veh_idx)];
    std::optional<int> best;
    double best_dx = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < vehicles_.size(); ++j) {
        if (static_cast<int>(j) == veh_idx) continue;
        const VehicleState& o = vehicles_[j];
        if (o.lane != lane || o.x <= me.x) continue;
        double dx = o.x - me.x;
        if (dx < best_dx) {
            best_dx = dx;
            best = static_cast<int>(j);
        }
    }
    return best;
}

std::optional<int> HighwayEnv::follower_in_lane(int veh_idx, int lane) const {
    const VehicleState& me = vehicles_[static_cast<size_t>(veh_idx)];
    std::optional<int> best;
    double best_dx = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < vehicles_.size(); ++j) {
        if (static_cast<int>(j) == veh_idx) continue;
        const VehicleState& o = vehicles_[j];
        if (o.lane != lane || o.x > me.x) continue;
        double dx = me.x - o.x;
        if (dx < best_dx) {
            best_dx = dx;
            best = static_cast<int>(j);
        }
    }
    return best;
}

double HighwayEnv::gap_between(int rear_idx, int front_idx) const {
    return vehicles_[static_cast<size_t>(front_idx)].x - vehicles_[static_cast<size_t>(rear_idx)].x -
           veh_length_;
}

// car-following acceleration of `veh_idx` while following in `lane`
double HighwayEnv::idm_for(int veh_idx, int lane) const {
    const VehicleState& me = vehicles_[static_cast<size_t>(veh_idx)];
    DriverProfile prof;
    double v0;
    if (veh_idx < n_controlled_) {
        prof = DriverProfile::of(DriverKind::Normal, veh_length_);
        v0 = ego_control_[static_cast<size_t>(veh_idx)].target_speed;
    } else {
        prof = behavior_profiles_[static_cast<size_t>(veh_idx - n_controlled_)];
        v0 = behavior_target_speed_[static_cast<size_t>(veh_idx - n_controlled_)];
    }
    auto leader = leader_in_lane(veh_idx, lane);
    if (!leader)
        return idm_acceleration(me.speed, me.speed, std::numeric_limits<double>::infinity(), prof,
                                v0);
    return idm_acceleration(me.speed, vehicles_[static_cast<size_t>(*leader)].speed,
                            gap_between(veh_idx, *leader), prof, v0);
}

// acceleration of `veh_idx` if `assume_leader_of` became its leader
double HighwayEnv::idm_hypothetical(int veh_idx, int leader_idx) const {
    const VehicleState& me = vehicles_[static_cast<size_t>(veh_idx)];
    DriverProfile prof;
    double v0;
    if (veh_idx < n_controlled_) {
        prof = DriverProfile::of(DriverKind::Normal, veh_length_);
        v0 = ego_control_[static_cast<size_t>(veh_idx)].target_speed;
    } else {
        prof = behavior_profiles_[static_cast<size_t>(veh_idx - n_controlled_)];
        v0 = behavior_target_speed_[static_cast<size_t>(veh_idx - n_controlled_)];
    }
    if (leader_idx < 0)
        return idm_acceleration(me.speed, me.speed, std::numeric_limits<double>::infinity(), prof,
                                v0);
    return idm_acceleration(me.speed, vehicles_[static_cast<size_t>(leader_idx)].speed,
                            gap_between(veh_idx, leader_idx), prof, v0);
}

void HighwayEnv::maybe_change_lane(int veh_idx) {
    int b = veh_idx - n_controlled_;
    const VehicleState& me = vehicles_[static_cast<size_t>(veh_idx)];
    const DriverProfile& prof = behavior_profiles_[static_cast<size_t>(b)];
    int current_target = behavior_target_lane_[static_cast<size_t>(b)];
    // only re-decide once the previous change has settled
    if (std::abs(me.y - lane_center(current_target)) > 0.1 * lane_width_) return;
    if (me.lane != current_target) return;

    double best_gain = -std::numeric_limits<double>::infinity();
    int best_lane = current_target;
    for (int cand : {current_target - 1, current_target + 1}) {
        if (cand < 0 || cand >= lanes_) continue;
        MobilContext ctx;
        ctx.ego_accel_now = idm_for(veh_idx, current_target);
        auto cand_leader = leader_in_lane(veh_idx, cand);
        ctx.ego_accel_after = idm_hypothetical(veh_idx, cand_leader ? *cand_leader : -1);

        auto new_follower = follower_in_lane(veh_idx, cand);
        if (new_follower) {
            auto nf_leader_now = leader_in_lane(*new_follower, cand);
            ctx.new_follower_accel_now =
                idm_hypothetical(*new_follower, nf_leader_now ? *nf_leader_now : -1);
            ctx.new_follower_accel_after = idm_hypothetical(*new_follower, veh_idx);
        }
        auto old_follower = follower_in_lane(veh_idx, current_target);
        if (old_follower) {
            ctx.old_follower_accel_now = idm_hypothetical(*old_follower, veh_idx);
            auto my_leader = leader_in_lane(veh_idx, current_target);
            ctx.old_follower_accel_after =
                idm_hypothetical(*old_follower, my_leader ? *my_leader : -1);
        }
        if (mobil_should_change(ctx, prof.politeness, prof.desired_decel, mobil_threshold_)) {
            double gain = ctx.ego_accel_after - ctx.ego_accel_now;
            if (gain > best_gain) {
                best_gain = gain;
                best_lane = cand;
            }
        }
    }
    behavior_target_lane_[static_cast<size_t>(b)] = best_lane;
}

void HighwayEnv::substep() {
    size_t total = vehicles_.size();
    std::vector<double> accel(total, 0.0), steer(total, 0.0);
    for (size_t i = 0; i < total; ++i) {
        const VehicleState& v = vehicles_[i];
        if (v.crashed) continue;
        if (static_cast<int>(i) < n_controlled_) {
            const EgoControl& ctl = ego_control_[i];
            accel[i] = std::clamp(kKpSpeed * (ctl.target_speed - v.speed), -ego_max_accel_,
                                  ego_max_accel_);
            steer[i] = lateral_steering(v.y, lane_center(ctl.target_lane), v.heading, v.speed,
                                        v.length);
        } else {
            size_t b = i - static_cast<size_t>(n_controlled_);
            int target_lane = behavior_target_lane_[b];
            accel[i] = idm_for(static_cast<int>(i), target_lane);
            steer[i] = lateral_steering(v.y, lane_center(target_lane), v.heading, v.speed,
                                        v.length);
        }
    }
    for (size_t i = 0; i < total; ++i) {
        VehicleState& v = vehicles_[i];
        if (v.crashed) continue;
        double max_speed = (static_cast<int>(i) < n_controlled_)
                               ? ego_max_speed_
                               : behavior_profiles_[i - static_cast<size_t>(n_controlled_)].max_speed;
        v = bicycle_step(v, accel[i], steer[i], dt_, max_speed);
        v.lane = lane_of(v.y);
    }
    check_collisions();
}

void HighwayEnv::check_collisions() {
    size_t total = vehicles_.size();
    for (size_t i = 0; i < total; ++i) {
        for (size_t j = i + 1; j < total; ++j) {
            VehicleState& a = vehicles_[i];
            VehicleState& b = vehicles_[j];
            if (a.crashed && b.crashed) continue;
            if (std::abs(a.x - b.x) > 2.0 * veh_length_ || std::abs(a.y - b.y) > 2.0 * veh_length_)
                continue;
            if (!rect_overlap(a.x, a.y, a.heading, veh_length_, veh_width_, b.x, b.y, b.heading,
                              veh_length_, veh_width_))
                continue;
            for (VehicleState* v : {&a, &b}) {
                if (v->crashed) continue;
                v->crashed = true;
                crashed_this_tick_[static_cast<size_t>(v->id)] = true;
                if (v->id < n_controlled_) speed_at_done_[static_cast<size_t>(v->id)] = v->speed;
                v->speed = 0.0;  // crashed vehicles freeze in place
            }
        }
    }
}

double HighwayEnv::reward_for(const VehicleState& v, double speed, bool crashed_this_tick) const {
    double r = crashed_this_tick ? kCrashPenalty : 0.0;
    r += kLaneRewardMax * static_cast<double>(v.lane) / static_cast<double>(lanes_ - 1);
    double frac = std::clamp((speed - kRewardSpeedLo) / (kRewardSpeedHi - kRewardSpeedLo), 0.0, 1.0);
    r += kSpeedRewardMax * frac;
    return r;
}

StepResult HighwayEnv::step(const std::vector<int>& actions) {
    if (static_cast<int>(actions.size()) != n_controlled_)
        throw EnvError("highway: expected one action per controlled agent");
    if (episode_done()) throw EnvError("highway: step past episode end");

    std::vector<bool> ignored(static_cast<size_t>(n_controlled_), false);
    std::fill(infeasible_flag_.begin(), infeasible_flag_.end(), false);
    for (int k = 0; k < n_controlled_; ++k) {
        VehicleState& v = vehicles_[static_cast<size_t>(k)];
        if (v.crashed) {
            ignored[static_cast<size_t>(k)] = true;
            continue;
        }
        int raw = actions[static_cast<size_t>(k)];
        if (raw < 0 || raw > 4) throw EnvError("highway: action out of range");
        EgoControl& ctl = ego_control_[static_cast<size_t>(k)];
        switch (static_cast<MetaAction>(raw)) {
            case MetaAction::Idle:
                break;
            case MetaAction::Faster:
                ctl.target_speed = std::min(ctl.target_speed + speed_delta_, ego_max_speed_);
                break;
            case MetaAction::Slower:
                ctl.target_speed = std::max(ctl.target_speed - speed_delta_, 0.0);
                break;
            case MetaAction::LaneLeft:
                if (ctl.target_lane - 1 >= 0)
                    ctl.target_lane -= 1;
                else
                    infeasible_flag_[static_cast<size_t>(k)] = true;  // degrade to idle
                break;
            case MetaAction::LaneRight:
                if (ctl.target_lane + 1 < lanes_)
                    ctl.target_lane += 1;
                else
                    infeasible_flag_[static_cast<size_t>(k)] = true;
                break;
        }
    }

    std::fill(crashed_this_tick_.begin(), crashed_this_tick_.end(), false);
    for (int b = 0; b < n_behavior_; ++b) {
        if (!vehicles_[static_cast<size_t>(n_controlled_ + b)].crashed)
            maybe_change_lane(n_controlled_ + b);
    }
    for (int s = 0; s < substeps_; ++s) substep();

    ++tick_;
    StepResult res;
    res.tick = tick_;
    res.agents.resize(static_cast<size_t>(n_controlled_));
    for (int k = 0; k < n_controlled_; ++k) {
        AgentStep& out = res.agents[static_cast<size_t>(k)];
        const VehicleState& v = vehicles_[static_cast<size_t>(k)];
        out.obs = observe(k);
        out.action_ignored = ignored[static_cast<size_t>(k)];
        out.lane = v.lane;
        if (done_emitted_[static_cast<size_t>(k)]) {
            out.reward = 0.0;  // done agents receive no further rewards
            out.done = true;
            out.speed = 0.0;
            continue;
        }
        bool crashed_now = crashed_this_tick_[static_cast<size_t>(k)];
        double speed = crashed_now ? speed_at_done_[static_cast<size_t>(k)] : v.speed;
        out.reward = reward_for(v, speed, crashed_now);
        out.collided = crashed_now;
        out.speed = speed;
        out.done = v.crashed || tick_ >= horizon_;
        if (out.done) done_emitted_[static_cast<size_t>(k)] = true;
    }
    res.episode_done = episode_done();
    return res;
}

Observation HighwayEnv::observe(int agent_id) const {
    if (agent_id < 0 || agent_id >= n_controlled_) throw EnvError("highway: unknown agent id");
    const VehicleState& ego = vehicles_[static_cast<size_t>(agent_id)];
    Observation obs;
    obs.ego = {ego.id, ego.x, ego.y, ego.speed * std::cos(ego.heading),
               ego.speed * std::sin(ego.heading)};

    struct Cand {
        double dist;
        EntityState st;
    };
    std::vector<Cand> cands;
    for (size_t j = 0; j < vehicles_.size(); ++j) {
        if (static_cast<int>(j) == agent_id) continue;
        const VehicleState& o = vehicles_[j];
        double dx = o.x - ego.x, dy = o.y - ego.y;
        if (std::abs(dx) > 100.0 || std::abs(dy) > 20.0) continue;  // observation scope
        EntityState st{o.id, dx, dy, o.speed * std::cos(o.heading), o.speed * std::sin(o.heading)};
        cands.push_back({std::hypot(dx, dy), st});
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

std::vector<EntityState> HighwayEnv::entity_states() const {
    std::vector<EntityState> out;
    out.reserve(vehicles_.size());
    for (const VehicleState& v : vehicles_)
        out.push_back({v.id, v.x, v.y, v.speed * std::cos(v.heading),
                       v.speed * std::sin(v.heading)});
    return out;
}

}  // namespace iplan::env
