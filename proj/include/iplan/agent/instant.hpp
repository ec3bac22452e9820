#pragma once

#include <optional>
#include <span>

#include "iplan/agent/features.hpp"
#include "iplan/checkpoint.hpp"
#include "iplan/layers.hpp"
#include "iplan/optim.hpp"

namespace iplan::agent {

struct InstantConfig {
    int capacity = 5;   // neighbor slots per observation
    int gat_hidden = 32;
    int zeta_dim = 32;
    int dec_hidden = 32;
    int t_p = 2;
    double dropout = 0.1;
    double lr = 2e-5;
    double grad_clip = 0.5;
    double leaky_slope = 0.2;
};

/// GAT over the current observation graph conditioned on behavioral latents,
/// a GRU whose hidden state is the instant latent, and an autoregressive GRU
/// decoder predicting all neighbors' trajectories t_p steps ahead.
class InstantModule {
  public:
    InstantModule(const InstantConfig& cfg, std::mt19937_64& init_rng);

    struct EncodeResult {
        std::vector<double> zeta;  // zeta_dim
        num::Tensor attention;     // (1+capacity)^2; node 0 is the ego
    };
    EncodeResult encode(const env::Observation& obs,
                        const std::map<int, BetaVec>& beta_by_id,
                        const std::vector<double>& prev_zeta) const;

    /// t_p feature-space frames, autoregressive from the given observation.
    std::vector<std::vector<double>> predict_trajectories(const env::Observation& obs,
                                                          const std::vector<double>& zeta) const;

    struct TrainResult {
        double loss = 0.0;
        int anchors = 0;
    };
    std::optional<TrainResult> train_step(std::span<const env::EpisodeRecord* const> records,
                                          std::mt19937_64& dropout_rng);

    /// Anchors with their replayed (detached) previous latents; behavioral
    /// latents come from the stored episode. Gradient checks must hold the
    /// table fixed while perturbing parameters.
    struct AnchorTable {
        struct Row {
            const env::EpisodeRecord* rec = nullptr;
            const std::vector<EntityTrack>* tracks = nullptr;
            int t = 0;
            std::vector<double> prev_zeta;
            double denom = 1.0;
        };
        std::vector<std::vector<EntityTrack>> track_storage;
        std::vector<Row> rows;
    };
    AnchorTable prepare_anchors(std::span<const env::EpisodeRecord* const> records) const;
    num::Var build_loss_from(const AnchorTable& table, bool training,
                             std::mt19937_64& dropout_rng) const;
    num::Var build_loss(std::span<const env::EpisodeRecord* const> records, bool training,
                        std::mt19937_64& dropout_rng, int* anchors_out = nullptr) const;

    /// Latent stream over a stored episode (stored behavioral latents, current
    /// parameters, no gradients). zeta[t] is the post-update latent at tick t.
    std::vector<std::vector<double>> replay_latents(const env::EpisodeRecord& record) const;

    std::vector<num::Var> parameters() const;
    void set_lr(double lr);
    void save(num::Checkpoint& ckpt, const std::string& prefix) const;
    void load(const num::Checkpoint& ckpt, const std::string& prefix);

    const InstantConfig& config() const { return cfg_; }
    void set_feature_scales(const FeatureScales& s) { scales_ = s; }

    // parameter views for composed-oracle tests
    const num::GatParams& gat() const { return gat_; }
    const num::GruParams& enc_gru() const { return enc_gru_; }
    const num::GruParams& dec_gru() const { return dec_gru_; }
    const num::LinearParams& dec_out() const { return dec_out_; }

  private:
    int node_dim() const { return kStateDim + kBetaDim; }
    int frame_len() const { return frame_dim(cfg_.capacity); }
    // graph-building core shared by encode() and the training path
    num::Var encode_graph(const env::Observation& obs, const std::map<int, BetaVec>& beta_by_id,
                          const num::Var& prev_zeta, num::Tensor* attention_out) const;

    InstantConfig cfg_;
    FeatureScales scales_;
    num::GatParams gat_;
    num::GruParams enc_gru_;
    num::GruParams dec_gru_;
    num::LinearParams dec_out_;
    std::unique_ptr<num::Adam> opt_;
};

}  // namespace iplan::agent
