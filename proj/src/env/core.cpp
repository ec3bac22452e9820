#include "iplan/env/core.hpp"

#include <algorithm>

namespace iplan::env {

void HistoryBuffer::record(int tick, const EntityState& state) {
    auto& track = tracks_[state.id];
    track.push_back({tick, state});
    if (static_cast<int>(track.size()) > window_)
        track.erase(track.begin());
}

void HistoryBuffer::clear() { tracks_.clear(); }

HistoryBuffer::Window HistoryBuffer::window_at(int entity_id, int t) const {
    Window w;
    w.states.assign(static_cast<size_t>(window_), EntityState{});
    w.valid.assign(static_cast<size_t>(window_), false);
    auto it = tracks_.find(entity_id);
    if (it == tracks_.end()) return w;
    const int first_tick = t - window_ + 1;
    for (const Sample& s : it->second) {
        if (s.tick < first_tick || s.tick > t) continue;
        size_t slot = static_cast<size_t>(s.tick - first_tick);
        w.states[slot] = s.state;
        w.valid[slot] = true;
    }
    return w;
}

std::vector<int> HistoryBuffer::tracked_ids() const {
    std::vector<int> ids;
    ids.reserve(tracks_.size());
    for (const auto& [id, _] : tracks_) ids.push_back(id);
    return ids;
}

const EntityState* EpisodeRecord::observed_state(int entity_id, int t) const {
    if (t < 0 || t >= length()) return nullptr;
    const Observation& obs = ticks[static_cast<size_t>(t)].obs;
    if (obs.ego.id == entity_id) return &obs.ego;
    for (int s = 0; s < obs.capacity(); ++s) {
        if (obs.present[static_cast<size_t>(s)] &&
            obs.neighbors[static_cast<size_t>(s)].id == entity_id)
            return &obs.neighbors[static_cast<size_t>(s)];
    }
    return nullptr;
}

}  // namespace iplan::env
