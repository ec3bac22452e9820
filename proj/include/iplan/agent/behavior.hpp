#pragma once

#include <optional>
#include <span>

#include "iplan/agent/features.hpp"
#include "iplan/checkpoint.hpp"
#include "iplan/layers.hpp"
#include "iplan/optim.hpp"

namespace iplan::agent {

struct BehaviorConfig {
    int window = 5;        // t_h
    int enc_hidden = 32;
    int dec_hidden = 64;
    double eta = 0.1;
    bool hard_mode = false;
    int hard_interval = 10;
    double dropout = 0.1;
    double lr = 1e-4;
    double grad_clip = 0.5;
};

/// One observed entity's padded history window in feature space.
struct FeatureWindow {
    std::vector<StateFeature> states;  // length == t_h, oldest first
    std::vector<bool> valid;
};

/// Per-opponent GRU encoder producing an 8-dim behavioral latent under a
/// soft (or interval-hard) update, and a GRU decoder predicting the
/// opponent's next t_h states, trained with a masked mean L1 loss.
class BehaviorModule {
  public:
    BehaviorModule(const BehaviorConfig& cfg, std::mt19937_64& init_rng);

    /// Raw encoder output E(window, prev) with no update rule applied.
    BetaVec encoder_output(const FeatureWindow& win, const BetaVec& prev) const;

    /// Latent update at `tick`: soft blend in soft mode; in hard mode the
    /// encoder output is adopted only at interval boundaries.
    BetaVec encode(const FeatureWindow& win, const BetaVec& prev, int tick) const;

    /// Predicted next-t_h states (feature space), eval mode.
    std::vector<StateFeature> decode_future(const FeatureWindow& win, const BetaVec& beta) const;

    struct TrainResult {
        double loss = 0.0;
        int anchors = 0;
    };
    /// One Adam step on the masked mean L1 loss over every anchor step of
    /// every record, with the latent recurrence replayed from episode start.
    /// Returns nullopt on a degenerate batch (no usable anchors).
    std::optional<TrainResult> train_step(std::span<const env::EpisodeRecord* const> records,
                                          std::mt19937_64& dropout_rng);

    /// Anchor rows with their replayed (detached) latent context. Previous
    /// latents enter the loss as data, mirroring the per-step update order
    /// of the training algorithm, so gradient checks must hold them fixed.
    struct AnchorTable {
        struct Row {
            const EntityTrack* track = nullptr;
            int anchor = 0;
            BetaVec prev{};
            BetaVec held{};
            bool pass_through = true;
            double denom = 1.0;
        };
        std::vector<std::vector<EntityTrack>> tracks;  // owning storage
        std::vector<Row> rows;
        int anchor_count = 0;
    };
    AnchorTable prepare_anchors(std::span<const env::EpisodeRecord* const> records) const;

    /// Loss graph over a prepared anchor table; dropout active only when
    /// `training`. Null when the table has no rows.
    num::Var build_loss_from(const AnchorTable& table, bool training,
                             std::mt19937_64& dropout_rng) const;

    /// Convenience: prepare_anchors + build_loss_from.
    num::Var build_loss(std::span<const env::EpisodeRecord* const> records, bool training,
                        std::mt19937_64& dropout_rng, int* anchors_out = nullptr) const;

    /// Replays the latent stream over a stored episode with current
    /// parameters (no gradients): beta[t][entity] after the tick-t update.
    std::vector<std::map<int, BetaVec>> replay_latents(const env::EpisodeRecord& record) const;

    std::vector<num::Var> parameters() const;
    void set_lr(double lr);
    void save(num::Checkpoint& ckpt, const std::string& prefix) const;
    void load(const num::Checkpoint& ckpt, const std::string& prefix);

    const BehaviorConfig& config() const { return cfg_; }
    void set_feature_scales(const FeatureScales& s) { scales_ = s; }

    // parameter views for composed-oracle tests
    const num::LinearParams& enc_init() const { return enc_init_; }
    const num::GruParams& enc_gru() const { return enc_gru_; }
    const num::LinearParams& enc_out() const { return enc_out_; }
    const num::GruParams& dec_gru() const { return dec_gru_; }
    const num::LinearParams& dec_out() const { return dec_out_; }

  private:
    static constexpr int kEncInput = kStateDim + 1;  // state + validity bit
    int dec_input() const { return kStateDim + 1 + kBetaDim; }

    BehaviorConfig cfg_;
    FeatureScales scales_;
    num::LinearParams enc_init_;  // prev latent -> initial hidden
    num::GruParams enc_gru_;
    num::LinearParams enc_out_;   // hidden -> latent
    num::GruParams dec_gru_;
    num::LinearParams dec_out_;   // hidden -> state delta
    std::unique_ptr<num::Adam> opt_;
};

}  // namespace iplan::agent
