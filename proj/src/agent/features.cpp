#include "iplan/agent/features.hpp"

namespace iplan::agent {

FeatureScales FeatureScales::for_env(const RunConfig& cfg) {
    FeatureScales s;
    if (cfg.is_highway()) {
        s.id = 64.0;
        s.ego_x = 1000.0;
        s.ego_y = cfg.hw_lanes * cfg.hw_lane_width;
        s.rel_x = 100.0;
        s.rel_y = 20.0;
        s.vel = 40.0;
    } else {
        s.id = 8.0;  // world units are already O(1) in navigation
    }
    return s;
}

StateFeature entity_features(const env::EntityState& st, bool is_ego, const FeatureScales& s) {
    double sx = is_ego ? s.ego_x : s.rel_x;
    double sy = is_ego ? s.ego_y : s.rel_y;
    return {st.id / s.id, st.px / sx, st.py / sy, st.vx / s.vel, st.vy / s.vel};
}

std::vector<double> obs_frame(const env::Observation& obs, const FeatureScales& s) {
    std::vector<double> out(static_cast<size_t>(frame_dim(obs.capacity())), 0.0);
    StateFeature ego = entity_features(obs.ego, true, s);
    std::copy(ego.begin(), ego.end(), out.begin());
    for (int k = 0; k < obs.capacity(); ++k) {
        if (!obs.present[static_cast<size_t>(k)]) continue;
        StateFeature f = entity_features(obs.neighbors[static_cast<size_t>(k)], false, s);
        std::copy(f.begin(), f.end(), out.begin() + (1 + k) * kStateDim);
    }
    return out;
}

int policy_input_dim(int capacity, int zeta_dim) {
    return kStateDim + capacity * (kStateDim + 1) + (1 + capacity) * kBetaDim + zeta_dim;
}

std::vector<double> policy_input(const env::Observation& obs, const FeatureScales& s,
                                 const std::map<int, std::array<double, kBetaDim>>& beta_by_id,
                                 const std::vector<double>& zeta, int zeta_dim) {
    int cap = obs.capacity();
    std::vector<double> out(static_cast<size_t>(policy_input_dim(cap, zeta_dim)), 0.0);
    size_t pos = 0;

    StateFeature ego = entity_features(obs.ego, true, s);
    std::copy(ego.begin(), ego.end(), out.begin() + pos);
    pos += kStateDim;
    for (int k = 0; k < cap; ++k) {
        if (obs.present[static_cast<size_t>(k)]) {
            StateFeature f = entity_features(obs.neighbors[static_cast<size_t>(k)], false, s);
            std::copy(f.begin(), f.end(), out.begin() + pos);
            out[pos + kStateDim] = 1.0;  // presence bit
        }
        pos += kStateDim + 1;
    }

    auto put_beta = [&](int entity_id) {
        auto it = beta_by_id.find(entity_id);
        if (it != beta_by_id.end())
            std::copy(it->second.begin(), it->second.end(), out.begin() + pos);
        pos += kBetaDim;
    };
    put_beta(obs.ego.id);
    for (int k = 0; k < cap; ++k) {
        if (obs.present[static_cast<size_t>(k)])
            put_beta(obs.neighbors[static_cast<size_t>(k)].id);
        else
            pos += kBetaDim;
    }

    for (int i = 0; i < zeta_dim && i < static_cast<int>(zeta.size()); ++i)
        out[pos + static_cast<size_t>(i)] = zeta[static_cast<size_t>(i)];
    return out;
}

std::vector<EntityTrack> entity_tracks(const env::EpisodeRecord& record, const FeatureScales& s) {
    int len = record.length();
    std::map<int, EntityTrack> by_id;
    auto track_of = [&](int id, bool is_ego) -> EntityTrack& {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            EntityTrack t;
            t.id = id;
            t.is_ego = is_ego;
            t.valid.assign(static_cast<size_t>(len), false);
            t.feat.assign(static_cast<size_t>(len), StateFeature{});
            it = by_id.emplace(id, std::move(t)).first;
        }
        return it->second;
    };
    for (int t = 0; t < len; ++t) {
        const env::Observation& obs = record.ticks[static_cast<size_t>(t)].obs;
        EntityTrack& ego = track_of(obs.ego.id, true);
        ego.valid[static_cast<size_t>(t)] = true;
        ego.feat[static_cast<size_t>(t)] = entity_features(obs.ego, true, s);
        for (int k = 0; k < obs.capacity(); ++k) {
            if (!obs.present[static_cast<size_t>(k)]) continue;
            const env::EntityState& st = obs.neighbors[static_cast<size_t>(k)];
            EntityTrack& tr = track_of(st.id, false);
            tr.valid[static_cast<size_t>(t)] = true;
            tr.feat[static_cast<size_t>(t)] = entity_features(st, false, s);
        }
    }
    std::vector<EntityTrack> out;
    out.reserve(by_id.size());
    for (auto& [id, tr] : by_id) out.push_back(std::move(tr));
    return out;
}

}  // namespace iplan::agent
