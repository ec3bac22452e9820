#include "iplan/agent/instant.hpp"

#include <algorithm>
#include <cmath>

namespace iplan::agent {

using namespace iplan::num;

InstantModule::InstantModule(const InstantConfig& cfg, std::mt19937_64& init_rng) : cfg_(cfg) {
    gat_ = GatParams::init(node_dim(), cfg_.gat_hidden, init_rng);
    gat_.leaky_slope = cfg_.leaky_slope;
    enc_gru_ = GruParams::init(cfg_.gat_hidden, cfg_.zeta_dim, init_rng);
    dec_gru_ = GruParams::init(frame_len(), cfg_.dec_hidden, init_rng);
    dec_out_ = LinearParams::init(cfg_.dec_hidden, frame_len(), init_rng);
    opt_ = std::make_unique<Adam>(parameters(),
                                  AdamConfig{cfg_.lr, 0.9, 0.999, 1e-8, cfg_.grad_clip});
}

void InstantModule::set_lr(double lr) { opt_->set_lr(lr); }

std::vector<Var> InstantModule::parameters() const {
    std::vector<Var> out = gat_.params();
    for (const auto& set : {enc_gru_.params(), dec_gru_.params()})
        out.insert(out.end(), set.begin(), set.end());
    auto lin = dec_out_.params();
    out.insert(out.end(), lin.begin(), lin.end());
    return out;
}

Var InstantModule::encode_graph(const env::Observation& obs,
                                const std::map<int, BetaVec>& beta_by_id, const Var& prev_zeta,
                                Tensor* attention_out) const {
    int n_nodes = 1 + obs.capacity();
    std::vector<Var> feats(static_cast<size_t>(n_nodes));
    std::vector<bool> present(static_cast<size_t>(n_nodes), false);

    auto node_features = [&](const env::EntityState& st, bool is_ego) {
        Tensor f({node_dim()});
        StateFeature sf = entity_features(st, is_ego, scales_);
        for (int d = 0; d < kStateDim; ++d) f[d] = sf[static_cast<size_t>(d)];
        auto it = beta_by_id.find(st.id);
        if (it != beta_by_id.end())
            for (int d = 0; d < kBetaDim; ++d) f[kStateDim + d] = it->second[static_cast<size_t>(d)];
        return constant(std::move(f));
    };
    feats[0] = node_features(obs.ego, true);
    present[0] = true;
    for (int k = 0; k < obs.capacity(); ++k) {
        if (!obs.present[static_cast<size_t>(k)]) {
            feats[static_cast<size_t>(k) + 1] = constant(Tensor({node_dim()}));
            continue;
        }
        feats[static_cast<size_t>(k) + 1] = node_features(obs.neighbors[static_cast<size_t>(k)], false);
        present[static_cast<size_t>(k) + 1] = true;
    }

    GatResult gat = gat_forward(gat_, feats, present);
    if (attention_out) *attention_out = gat.attention;

    // permutation-invariant mean pooling over present nodes
    std::vector<Var> outs;
    for (int i = 0; i < n_nodes; ++i)
        if (present[static_cast<size_t>(i)]) outs.push_back(gat.node_out[static_cast<size_t>(i)]);
    Var pooled = outs[0];
    for (size_t i = 1; i < outs.size(); ++i) pooled = add(pooled, outs[i]);
    pooled = scale(pooled, 1.0 / static_cast<double>(outs.size()));

    return gru_step(enc_gru_, pooled, prev_zeta);
}

InstantModule::EncodeResult InstantModule::encode(const env::Observation& obs,
                                                  const std::map<int, BetaVec>& beta_by_id,
                                                  const std::vector<double>& prev_zeta) const {
    NoGradGuard ng;
    Var prev = constant(prev_zeta.empty() ? Tensor({cfg_.zeta_dim})
                                          : Tensor::vec(std::vector<double>(prev_zeta)));
    EncodeResult res;
    Var z = encode_graph(obs, beta_by_id, prev, &res.attention);
    res.zeta.assign(z->value.data(), z->value.data() + z->value.size());
    return res;
}

std::vector<std::vector<double>> InstantModule::predict_trajectories(
    const env::Observation& obs, const std::vector<double>& zeta) const {
    NoGradGuard ng;
    Var h = constant(Tensor::vec(std::vector<double>(zeta)));
    std::vector<double> frame = obs_frame(obs, scales_);
    std::vector<std::vector<double>> out;
    for (int k = 0; k < cfg_.t_p; ++k) {
        h = gru_step(dec_gru_, constant(Tensor::vec(std::vector<double>(frame))), h);
        Var delta = linear(dec_out_, h);
        for (int d = 0; d < frame_len(); ++d) frame[static_cast<size_t>(d)] += delta->value[d];
        out.push_back(frame);
    }
    return out;
}

std::vector<std::vector<double>> InstantModule::replay_latents(
    const env::EpisodeRecord& record) const {
    std::vector<std::vector<double>> stream;
    std::vector<double> zeta(static_cast<size_t>(cfg_.zeta_dim), 0.0);
    for (const env::TickRecord& tick : record.ticks) {
        std::map<int, BetaVec> beta;
        for (const auto& [id, b] : tick.beta) beta[id] = b;
        zeta = encode(tick.obs, beta, zeta).zeta;
        stream.push_back(zeta);
    }
    return stream;
}

InstantModule::AnchorTable InstantModule::prepare_anchors(
    std::span<const env::EpisodeRecord* const> records) const {
    AnchorTable table;
    auto& all_tracks = table.track_storage;
    all_tracks.reserve(records.size());
    for (const env::EpisodeRecord* rec : records) all_tracks.push_back(entity_tracks(*rec, scales_));

    for (size_t ri = 0; ri < records.size(); ++ri) {
        const env::EpisodeRecord& rec = *records[ri];
        int len = rec.length();
        auto zeta_stream = replay_latents(rec);  // detached, current params

        // per-entity lookup into this record's tracks
        std::map<int, const EntityTrack*> track_of;
        for (const EntityTrack& tr : all_tracks[ri]) track_of[tr.id] = &tr;

        for (int t = 0; t + 1 < len; ++t) {
            const env::Observation& obs = rec.ticks[static_cast<size_t>(t)].obs;
            int denom = 0;
            for (int s = 0; s < obs.capacity(); ++s) {
                if (!obs.present[static_cast<size_t>(s)]) continue;
                const EntityTrack* tr = track_of.at(obs.neighbors[static_cast<size_t>(s)].id);
                for (int k = 1; k <= cfg_.t_p && t + k < len; ++k)
                    if (tr->valid[static_cast<size_t>(t + k)]) ++denom;
            }
            if (denom == 0) continue;
            AnchorTable::Row a;
            a.rec = &rec;
            a.tracks = &all_tracks[ri];
            a.t = t;
            a.prev_zeta = (t == 0) ? std::vector<double>(static_cast<size_t>(cfg_.zeta_dim), 0.0)
                                   : zeta_stream[static_cast<size_t>(t) - 1];
            a.denom = denom;
            table.rows.push_back(std::move(a));
        }
    }
    return table;
}

Var InstantModule::build_loss_from(const AnchorTable& table, bool training,
                                   std::mt19937_64& dropout_rng) const {
    const auto& anchors = table.rows;
    if (anchors.empty()) return nullptr;

    const int chunk_size = 32;
    Var total;
    for (size_t start = 0; start < anchors.size(); start += chunk_size) {
        size_t stop = std::min(anchors.size(), start + chunk_size);
        int b = static_cast<int>(stop - start);

        // encoder per anchor (graph attention is per-tick), then batch the decoder
        std::vector<Var> zeta_rows(static_cast<size_t>(b));
        for (int r = 0; r < b; ++r) {
            const AnchorTable::Row& a = anchors[start + static_cast<size_t>(r)];
            const env::TickRecord& tick = a.rec->ticks[static_cast<size_t>(a.t)];
            std::map<int, BetaVec> beta;
            for (const auto& [id, bv] : tick.beta) beta[id] = bv;
            Var prev = constant(Tensor::vec(std::vector<double>(a.prev_zeta)));
            zeta_rows[static_cast<size_t>(r)] = encode_graph(tick.obs, beta, prev, nullptr);
        }
        Var h = stack_rows(zeta_rows);  // [b x zeta_dim]

        Tensor frames({b, frame_len()});
        for (int r = 0; r < b; ++r) {
            const AnchorTable::Row& a = anchors[start + static_cast<size_t>(r)];
            auto f = obs_frame(a.rec->ticks[static_cast<size_t>(a.t)].obs, scales_);
            std::copy(f.begin(), f.end(), frames.data() + static_cast<size_t>(r) * frame_len());
        }
        Var cur = constant(frames);

        std::vector<Var> step_losses;
        for (int k = 1; k <= cfg_.t_p; ++k) {
            h = gru_step_rows(dec_gru_, cur, h);
            Var hidden = dropout(h, cfg_.dropout, training, dropout_rng);
            cur = add(cur, linear_rows(dec_out_, hidden));

            Tensor target({b, frame_len()});
            Tensor weight({b, frame_len()});
            for (int r = 0; r < b; ++r) {
                const AnchorTable::Row& a = anchors[start + static_cast<size_t>(r)];
                if (a.t + k >= a.rec->length()) continue;
                const env::Observation& obs = a.rec->ticks[static_cast<size_t>(a.t)].obs;
                std::map<int, const EntityTrack*> track_of;
                for (const EntityTrack& tr : *a.tracks) track_of[tr.id] = &tr;
                for (int s = 0; s < obs.capacity(); ++s) {
                    if (!obs.present[static_cast<size_t>(s)]) continue;
                    const EntityTrack* tr = track_of.at(obs.neighbors[static_cast<size_t>(s)].id);
                    if (!tr->valid[static_cast<size_t>(a.t + k)]) continue;
                    for (int d = 0; d < kStateDim; ++d) {
                        int col = (1 + s) * kStateDim + d;
                        target.at(r, col) = tr->feat[static_cast<size_t>(a.t + k)][static_cast<size_t>(d)];
                        weight.at(r, col) = 1.0 / a.denom;
                    }
                }
                // ego block stays at weight zero: the ego's own future is
                // predicted but excluded from the loss
            }
            step_losses.push_back(masked_l1(cur, target, weight));
        }
        Var chunk_loss = step_losses[0];
        for (size_t i = 1; i < step_losses.size(); ++i) chunk_loss = add(chunk_loss, step_losses[i]);
        total = total ? add(total, chunk_loss) : chunk_loss;
    }
    return scale(total, 1.0 / static_cast<double>(anchors.size()));
}

Var InstantModule::build_loss(std::span<const env::EpisodeRecord* const> records, bool training,
                              std::mt19937_64& dropout_rng, int* anchors_out) const {
    AnchorTable table = prepare_anchors(records);
    if (anchors_out) *anchors_out = static_cast<int>(table.rows.size());
    return build_loss_from(table, training, dropout_rng);
}

std::optional<InstantModule::TrainResult> InstantModule::train_step(
    std::span<const env::EpisodeRecord* const> records, std::mt19937_64& dropout_rng) {
    AnchorTable table = prepare_anchors(records);
    Var loss = build_loss_from(table, /*training=*/true, dropout_rng);
    if (!loss) return std::nullopt;
    num::zero_grad(parameters());
    num::backward(loss);
    opt_->step();
    return TrainResult{loss->value[0], static_cast<int>(table.rows.size())};
}

void InstantModule::save(num::Checkpoint& ckpt, const std::string& prefix) const {
    ckpt.add(prefix + "/gat/w", gat_.w->value);
    ckpt.add(prefix + "/gat/a_src", gat_.a_src->value);
    ckpt.add(prefix + "/gat/a_dst", gat_.a_dst->value);
    ckpt.add(prefix + "/dec_out/w", dec_out_.w->value);
    ckpt.add(prefix + "/dec_out/b", dec_out_.b->value);
    const char* gate_names[] = {"wz", "uz", "bz", "wr", "ur", "br", "wn", "un", "bn"};
    auto enc_g = enc_gru_.params();
    auto dec_g = dec_gru_.params();
    for (int i = 0; i < 9; ++i) {
        ckpt.add(prefix + "/enc_gru/" + gate_names[i], enc_g[static_cast<size_t>(i)]->value);
        ckpt.add(prefix + "/dec_gru/" + gate_names[i], dec_g[static_cast<size_t>(i)]->value);
    }
}

void InstantModule::load(const num::Checkpoint& ckpt, const std::string& prefix) {
    auto get = [&](const std::string& name, const Var& v) {
        const Tensor* t = ckpt.find(prefix + name);
        if (!t) throw Error("checkpoint missing tensor: " + prefix + name);
        if (!t->same_shape(v->value)) throw Error("checkpoint shape mismatch: " + prefix + name);
        v->value = *t;
    };
    get("/gat/w", gat_.w);
    get("/gat/a_src", gat_.a_src);
    get("/gat/a_dst", gat_.a_dst);
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
