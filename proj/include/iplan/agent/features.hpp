#pragma once

#include <array>
#include <map>

#include "iplan/config.hpp"
#include "iplan/env/core.hpp"
#include "iplan/tensor.hpp"

namespace iplan::agent {

constexpr int kStateDim = 5;  // id, px, py, vx, vy
constexpr int kBetaDim = 8;

using BetaVec = std::array<double, kBetaDim>;

/// Input scaling per environment, applied symmetrically to network inputs
/// and prediction targets. Ego uses absolute-position scales, neighbors the
/// relative-position scales.
struct FeatureScales {
    double id = 8.0;
    double ego_x = 1.0, ego_y = 1.0;
    double rel_x = 1.0, rel_y = 1.0;
    double vel = 1.0;

    static FeatureScales for_env(const RunConfig& cfg);
};

using StateFeature = std::array<double, kStateDim>;

StateFeature entity_features(const env::EntityState& st, bool is_ego, const FeatureScales& s);

/// Flattened observation frame [(1 + capacity) * kStateDim]: ego block then
/// neighbor slots, masked slots zero.
std::vector<double> obs_frame(const env::Observation& obs, const FeatureScales& s);

inline int frame_dim(int capacity) { return (1 + capacity) * kStateDim; }

/// Policy input layout:
///   frame block with a presence bit per neighbor slot,
///   beta block (ego's own latent then one latent per slot, zero if masked),
///   zeta block.
int policy_input_dim(int capacity, int zeta_dim);
std::vector<double> policy_input(const env::Observation& obs, const FeatureScales& s,
                                 const std::map<int, std::array<double, kBetaDim>>& beta_by_id,
                                 const std::vector<double>& zeta, int zeta_dim);

/// Per-entity feature series reconstructed from a stored episode: feat[t] is
/// the scaled observed state at tick t, valid[t] marks whether the entity was
/// observed then.
struct EntityTrack {
    int id = 0;
    bool is_ego = false;
    std::vector<bool> valid;
    std::vector<StateFeature> feat;
};

std::vector<EntityTrack> entity_tracks(const env::EpisodeRecord& record, const FeatureScales& s);

}  // namespace iplan::agent
