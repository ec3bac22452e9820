#include "iplan/agent/behavior.hpp"

#include <cmath>

namespace iplan::agent {

using namespace iplan::num;

namespace {

// weighted L1 with per-entry weights folded into the mask tensor
Var weighted_l1(const Var& pred, const Tensor& target, const Tensor& weights) {
    return masked_l1(pred, target, weights);
}

Tensor window_input_row(const FeatureWindow& win, int k) {
    Tensor x({kStateDim + 1});
    for (int d = 0; d < kStateDim; ++d) x[d] = win.states[static_cast<size_t>(k)][static_cast<size_t>(d)];
    x[kStateDim] = win.valid[static_cast<size_t>(k)] ? 1.0 : 0.0;
    return x;
}

}  // namespace

BehaviorModule::BehaviorModule(const BehaviorConfig& cfg, std::mt19937_64& init_rng) : cfg_(cfg) {
    enc_init_ = LinearParams::init(kBetaDim, cfg_.enc_hidden, init_rng);
    enc_gru_ = GruParams::init(kEncInput, cfg_.enc_hidden, init_rng);
    enc_out_ = LinearParams::init(cfg_.enc_hidden, kBetaDim, init_rng);
    dec_gru_ = GruParams::init(dec_input(), cfg_.dec_hidden, init_rng);
    dec_out_ = LinearParams::init(cfg_.dec_hidden, kStateDim, init_rng);
    opt_ = std::make_unique<Adam>(parameters(), AdamConfig{cfg_.lr, 0.9, 0.999, 1e-8, cfg_.grad_clip});
}

void BehaviorModule::set_lr(double lr) { opt_->set_lr(lr); }

std::vector<Var> BehaviorModule::parameters() const {
    std::vector<Var> out;
    for (const auto& set : {enc_init_.params(), enc_out_.params(), dec_out_.params()})
        out.insert(out.end(), set.begin(), set.end());
    for (const auto& set : {enc_gru_.params(), dec_gru_.params()})
        out.insert(out.end(), set.begin(), set.end());
    return out;
}

BetaVec BehaviorModule::encoder_output(const FeatureWindow& win, const BetaVec& prev) const {
    NoGradGuard ng;
    Var prev_v = constant(Tensor::vec({prev.begin(), prev.end()}));
    Var h = tanh_v(linear(enc_init_, prev_v));
    for (int k = 0; k < cfg_.window; ++k)
        h = gru_step(enc_gru_, constant(window_input_row(win, k)), h);
    Var e = linear(enc_out_, h);
    BetaVec out;
    for (int d = 0; d < kBetaDim; ++d) out[static_cast<size_t>(d)] = e->value[d];
    return out;
}

BetaVec BehaviorModule::encode(const FeatureWindow& win, const BetaVec& prev, int tick) const {
    BetaVec e = encoder_output(win, prev);
    BetaVec out;
    if (cfg_.hard_mode) {
        bool boundary = tick > 0 && tick % cfg_.hard_interval == 0;
        out = boundary ? e : prev;
    } else {
        for (int d = 0; d < kBetaDim; ++d)
            out[static_cast<size_t>(d)] =
                cfg_.eta * e[static_cast<size_t>(d)] + (1.0 - cfg_.eta) * prev[static_cast<size_t>(d)];
    }
    return out;
}

std::vector<StateFeature> BehaviorModule::decode_future(const FeatureWindow& win,
                                                        const BetaVec& beta) const {
    NoGradGuard ng;
    Tensor beta_t = Tensor::vec({beta.begin(), beta.end()});
    Var h = constant(Tensor({cfg_.dec_hidden}));

    // base for delta prediction: last valid window state, zeros if none
    StateFeature base{};
    for (int k = cfg_.window - 1; k >= 0; --k)
        if (win.valid[static_cast<size_t>(k)]) {
            base = win.states[static_cast<size_t>(k)];
            break;
        }

    for (int k = 0; k < cfg_.window; ++k) {
        Tensor in({dec_input()});
        Tensor wrow = window_input_row(win, k);
        for (int d = 0; d < kStateDim + 1; ++d) in[d] = wrow[d];
        for (int d = 0; d < kBetaDim; ++d) in[kStateDim + 1 + d] = beta_t[d];
        h = gru_step(dec_gru_, constant(in), h);
    }

    std::vector<StateFeature> preds;
    StateFeature cur = base;
    for (int k = 0; k < cfg_.window; ++k) {
        if (k > 0) {
            Tensor in({dec_input()});
            for (int d = 0; d < kStateDim; ++d) in[d] = cur[static_cast<size_t>(d)];
            in[kStateDim] = 1.0;
            for (int d = 0; d < kBetaDim; ++d) in[kStateDim + 1 + d] = beta_t[d];
            h = gru_step(dec_gru_, constant(in), h);
        }
        Var delta = linear(dec_out_, h);
        for (int d = 0; d < kStateDim; ++d) cur[static_cast<size_t>(d)] += delta->value[d];
        preds.push_back(cur);
    }
    return preds;
}

std::vector<std::map<int, BetaVec>> BehaviorModule::replay_latents(
    const env::EpisodeRecord& record) const {
    auto tracks = entity_tracks(record, scales_);
    int len = record.length();
    std::vector<std::map<int, BetaVec>> stream(static_cast<size_t>(len));
    for (const EntityTrack& tr : tracks) {
        BetaVec prev{};
        for (int t = 0; t < len; ++t) {
            FeatureWindow win;
            win.states.assign(static_cast<size_t>(cfg_.window), StateFeature{});
            win.valid.assign(static_cast<size_t>(cfg_.window), false);
            for (int k = 0; k < cfg_.window; ++k) {
                int src = t - cfg_.window + 1 + k;
                if (src < 0) continue;
                win.states[static_cast<size_t>(k)] = tr.feat[static_cast<size_t>(src)];
                win.valid[static_cast<size_t>(k)] = tr.valid[static_cast<size_t>(src)];
            }
            prev = encode(win, prev, t);
            stream[static_cast<size_t>(t)][tr.id] = prev;
        }
    }
    return stream;
}

BehaviorModule::AnchorTable BehaviorModule::prepare_anchors(
    std::span<const env::EpisodeRecord* const> records) const {
    const int w = cfg_.window;
    AnchorTable table;
    auto& all_tracks = table.tracks;
    all_tracks.reserve(records.size());
    for (const env::EpisodeRecord* rec : records) all_tracks.push_back(entity_tracks(*rec, scales_));

    auto& rows = table.rows;
    for (size_t ri = 0; ri < records.size(); ++ri) {
        const auto& tracks = all_tracks[ri];
        int len = records[ri]->length();

        // detached latent replay from episode start with current parameters
        std::vector<std::vector<BetaVec>> beta_before(tracks.size());
        std::vector<std::vector<BetaVec>> beta_after(tracks.size());
        {
            NoGradGuard ng;
            for (size_t ti = 0; ti < tracks.size(); ++ti) {
                BetaVec prev{};
                beta_before[ti].resize(static_cast<size_t>(len));
                beta_after[ti].resize(static_cast<size_t>(len));
                for (int t = 0; t < len; ++t) {
                    beta_before[ti][static_cast<size_t>(t)] = prev;
                    FeatureWindow win;
                    win.states.assign(static_cast<size_t>(w), StateFeature{});
                    win.valid.assign(static_cast<size_t>(w), false);
                    for (int k = 0; k < w; ++k) {
                        int src = t - w + 1 + k;
                        if (src < 0) continue;
                        win.states[static_cast<size_t>(k)] = tracks[ti].feat[static_cast<size_t>(src)];
                        win.valid[static_cast<size_t>(k)] = tracks[ti].valid[static_cast<size_t>(src)];
                    }
                    prev = encode(win, prev, t);
                    beta_after[ti][static_cast<size_t>(t)] = prev;
                }
            }
        }

        std::map<int, double> anchor_denom;
        size_t first_row = rows.size();
        for (size_t ti = 0; ti < tracks.size(); ++ti) {
            for (int t = 0; t < len; ++t) {
                int valid_targets = 0;
                for (int k = 1; k <= w && t + k < len; ++k)
                    if (tracks[ti].valid[static_cast<size_t>(t + k)]) ++valid_targets;
                if (valid_targets == 0) continue;
                anchor_denom[t] += valid_targets;
                AnchorTable::Row row;
                row.track = &tracks[ti];
                row.anchor = t;
                row.prev = beta_before[ti][static_cast<size_t>(t)];
                row.held = beta_after[ti][static_cast<size_t>(t)];
                row.pass_through = !cfg_.hard_mode || (t > 0 && t % cfg_.hard_interval == 0);
                rows.push_back(row);
            }
        }
        for (size_t r = first_row; r < rows.size(); ++r)
            rows[r].denom = anchor_denom[rows[r].anchor];
        table.anchor_count += static_cast<int>(anchor_denom.size());
    }
    return table;
}

Var BehaviorModule::build_loss_from(const AnchorTable& table, bool training,
                                    std::mt19937_64& dropout_rng) const {
    const int w = cfg_.window;
    const auto& rows = table.rows;
    const int anchor_count = table.anchor_count;
    if (rows.empty()) return nullptr;

    // batched loss over row chunks
    const int chunk_size = 64;
    Var total;
    for (size_t start = 0; start < rows.size(); start += chunk_size) {
        size_t stop = std::min(rows.size(), start + chunk_size);
        int b = static_cast<int>(stop - start);

        // encoder over the window
        Tensor prev_t({b, kBetaDim});
        for (int r = 0; r < b; ++r)
            for (int d = 0; d < kBetaDim; ++d)
                prev_t.at(r, d) = rows[start + static_cast<size_t>(r)].prev[static_cast<size_t>(d)];
        Var prev_rows = constant(prev_t);
        Var h = tanh_v(linear_rows(enc_init_, prev_rows));
        for (int k = 0; k < w; ++k) {
            Tensor xk({b, kEncInput});
            for (int r = 0; r < b; ++r) {
                const AnchorTable::Row& row = rows[start + static_cast<size_t>(r)];
                int src = row.anchor - w + 1 + k;
                if (src >= 0 && row.track->valid[static_cast<size_t>(src)]) {
                    for (int d = 0; d < kStateDim; ++d)
                        xk.at(r, d) = row.track->feat[static_cast<size_t>(src)][static_cast<size_t>(d)];
                    xk.at(r, kStateDim) = 1.0;
                }
            }
            h = gru_step_rows(enc_gru_, constant(xk), h);
        }
        Var enc = linear_rows(enc_out_, h);  // E output, [b x 8]

        // update rule: eta E + (1-eta) prev in soft mode; in hard mode the
        // encoder output passes through only at interval anchors
        Tensor pass_mask({b, kBetaDim});
        Tensor held_part({b, kBetaDim});
        for (int r = 0; r < b; ++r) {
            const AnchorTable::Row& row = rows[start + static_cast<size_t>(r)];
            for (int d = 0; d < kBetaDim; ++d) {
                if (cfg_.hard_mode) {
                    pass_mask.at(r, d) = row.pass_through ? 1.0 : 0.0;
                    held_part.at(r, d) = row.pass_through ? 0.0 : row.held[static_cast<size_t>(d)];
                } else {
                    pass_mask.at(r, d) = cfg_.eta;
                    held_part.at(r, d) = (1.0 - cfg_.eta) * row.prev[static_cast<size_t>(d)];
                }
            }
        }
        Var beta = add(mul(enc, constant(pass_mask)), constant(held_part));

        // decoder: consume the window, then roll out w delta predictions
        Var dh = constant(Tensor({b, cfg_.dec_hidden}));
        for (int k = 0; k < w; ++k) {
            Tensor xk({b, kStateDim + 1});
            for (int r = 0; r < b; ++r) {
                const AnchorTable::Row& row = rows[start + static_cast<size_t>(r)];
                int src = row.anchor - w + 1 + k;
                if (src >= 0 && row.track->valid[static_cast<size_t>(src)]) {
                    for (int d = 0; d < kStateDim; ++d)
                        xk.at(r, d) = row.track->feat[static_cast<size_t>(src)][static_cast<size_t>(d)];
                    xk.at(r, kStateDim) = 1.0;
                }
            }
            dh = gru_step_rows(dec_gru_, hcat(constant(xk), beta), dh);
        }

        Tensor base({b, kStateDim});
        for (int r = 0; r < b; ++r) {
            const AnchorTable::Row& row = rows[start + static_cast<size_t>(r)];
            for (int k = w - 1; k >= 0; --k) {
                int src = row.anchor - w + 1 + k;
                if (src >= 0 && row.track->valid[static_cast<size_t>(src)]) {
                    for (int d = 0; d < kStateDim; ++d)
                        base.at(r, d) = row.track->feat[static_cast<size_t>(src)][static_cast<size_t>(d)];
                    break;
                }
            }
        }

        Var cur = constant(base);
        Tensor ones_col({b, 1});
        ones_col.fill(1.0);
        std::vector<Var> step_losses;
        for (int k = 1; k <= w; ++k) {
            if (k > 1) {
                Var in = hcat(hcat(cur, constant(ones_col)), beta);
                dh = gru_step_rows(dec_gru_, in, dh);
            }
            Var hidden = dropout(dh, cfg_.dropout, training, dropout_rng);
            cur = add(cur, linear_rows(dec_out_, hidden));

            Tensor target({b, kStateDim});
            Tensor weight({b, kStateDim});
            for (int r = 0; r < b; ++r) {
                const AnchorTable::Row& row = rows[start + static_cast<size_t>(r)];
                int tgt = row.anchor + k;
                if (tgt < static_cast<int>(row.track->valid.size()) &&
                    row.track->valid[static_cast<size_t>(tgt)]) {
                    for (int d = 0; d < kStateDim; ++d) {
                        target.at(r, d) = row.track->feat[static_cast<size_t>(tgt)][static_cast<size_t>(d)];
                        weight.at(r, d) = 1.0 / row.denom;
                    }
                }
            }
            step_losses.push_back(weighted_l1(cur, target, weight));
        }
        Var chunk_loss = step_losses[0];
        for (size_t i = 1; i < step_losses.size(); ++i)
            chunk_loss = add(chunk_loss, step_losses[static_cast<size_t>(i)]);
        total = total ? add(total, chunk_loss) : chunk_loss;
    }
    return scale(total, 1.0 / static_cast<double>(anchor_count));
}

Var BehaviorModule::build_loss(std::span<const env::EpisodeRecord* const> records, bool training,
                               std::mt19937_64& dropout_rng, int* anchors_out) const {
    AnchorTable table = prepare_anchors(records);
    if (anchors_out) *anchors_out = table.anchor_count;
    return build_loss_from(table, training, dropout_rng);
}

std::optional<BehaviorModule::TrainResult> BehaviorModule::train_step(
    std::span<const env::EpisodeRecord* const> records, std::mt19937_64& dropout_rng) {
    AnchorTable table = prepare_anchors(records);
    Var loss = build_loss_from(table, /*training=*/true, dropout_rng);
    if (!loss) return std::nullopt;
    num::zero_grad(parameters());
    num::backward(loss);
    opt_->step();
    return TrainResult{loss->value[0], table.anchor_count};
}

void BehaviorModule::save(num::Checkpoint& ckpt, const std::string& prefix) const {
    auto put = [&](const std::string& name, const Var& v) { ckpt.add(prefix + name, v->value); };
    put("/enc_init/w", enc_init_.w);
    put("/enc_init/b", enc_init_.b);
    put("/enc_out/w", enc_out_.w);
    put("/enc_out/b", enc_out_.b);
    put("/dec_out/w", dec_out_.w);
    put("/dec_out/b", dec_out_.b);
    const char* gate_names[] = {"wz", "uz", "bz", "wr", "ur", "br", "wn", "un", "bn"};
    auto enc_g = enc_gru_.params();
    auto dec_g = dec_gru_.params();
    for (int i = 0; i < 9; ++i) {
        put(std::string("/enc_gru/") + gate_names[i], enc_g[static_cast<size_t>(i)]);
        put(std::string("/dec_gru/") + gate_names[i], dec_g[static_cast<size_t>(i)]);
    }
}

void BehaviorModule::load(const num::Checkpoint& ckpt, const std::string& prefix) {
    auto get = [&](const std::string& name, const Var& v) {
        const Tensor* t = ckpt.find(prefix + name);
        if (!t) throw Error("checkpoint missing tensor: " + prefix + name);
        if (!t->same_shape(v->value)) throw Error("checkpoint shape mismatch: " + prefix + name);
        v->value = *t;
    };
    get("/enc_init/w", enc_init_.w);
    get("/enc_init/b", enc_init_.b);
    get("/enc_out/w", enc_out_.w);
    get("/enc_out/b", enc_out_.b);
    get("/dec_out/w", dec_out_.w);
    get("/dec_out/b", dec_out_.b);
    const char* gate_names[] = {"wz", "uz", "bz", "wr", "ur", "br", "wn", "un", "bn"};
    auto enc_g = enc_gru_.params();
    auto dec_g = dec_gru_.params();
    for (int i = 0; i < 9; ++i) {
        get(std::string("/enc_gru/") + gate_names[i], enc_g[static_cast<size_t>(i)]);
        get(std::string("/dec_gru/") + gate_names[i], dec_g[static_cast<size_t>(i)]);
    }
}

}  // namespace iplan::agent
