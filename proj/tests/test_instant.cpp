#include "doctest.h"

#include <random>

#include "iplan/agent/instant.hpp"
#include "oracles.hpp"

using namespace iplan::agent;
using iplan::env::EntityState;
using iplan::env::Observation;
using iplan::num::Tensor;
using iplan::num::Var;

namespace {

InstantConfig small_cfg(int capacity = 3, int t_p = 2) {
    InstantConfig cfg;
    cfg.capacity = capacity;
    cfg.gat_hidden = 6;
    cfg.zeta_dim = 5;
    cfg.dec_hidden = 5;
    cfg.t_p = t_p;
    return cfg;
}

Observation random_obs(int capacity, int present_count, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Observation obs;
    obs.ego = {0, u(rng), u(rng), u(rng), u(rng)};
    obs.neighbors.assign(static_cast<size_t>(capacity), EntityState{});
    obs.present.assign(static_cast<size_t>(capacity), false);
    for (int s = 0; s < present_count; ++s) {
        obs.neighbors[static_cast<size_t>(s)] = {s + 1, u(rng), u(rng), u(rng), u(rng)};
        obs.present[static_cast<size_t>(s)] = true;
    }
    return obs;
}

std::map<int, BetaVec> random_betas(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::map<int, BetaVec> out;
    for (int id = 0; id <= n; ++id) {
        BetaVec b;
        for (auto& v : b) v = u(rng);
        out[id] = b;
    }
    return out;
}

// same synthetic constant-velocity data as the behavior tests
iplan::env::EpisodeRecord constant_velocity_record(int len, int n_entities, int capacity,
                                                   uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> upos(-1.0, 1.0), uvel(-0.03, 0.03);
    std::vector<std::array<double, 4>> init;
    for (int j = 0; j < n_entities; ++j)
        init.push_back({upos(rng), upos(rng), uvel(rng), uvel(rng)});

    iplan::env::EpisodeRecord rec;
    rec.agent_id = 0;
    for (int t = 0; t < len; ++t) {
        iplan::env::TickRecord tick;
        tick.obs.ego = {0, 0.0, 0.0, 0.0, 0.0};
        tick.obs.neighbors.assign(static_cast<size_t>(capacity), EntityState{});
        tick.obs.present.assign(static_cast<size_t>(capacity), false);
        for (int j = 0; j < n_entities && j < capacity; ++j) {
            auto& st = tick.obs.neighbors[static_cast<size_t>(j)];
            st.id = j + 1;
            st.px = init[static_cast<size_t>(j)][0] + init[static_cast<size_t>(j)][2] * t;
            st.py = init[static_cast<size_t>(j)][1] + init[static_cast<size_t>(j)][3] * t;
            st.vx = init[static_cast<size_t>(j)][2];
            st.vy = init[static_cast<size_t>(j)][3];
            tick.obs.present[static_cast<size_t>(j)] = true;
            tick.beta[j + 1] = BetaVec{};
        }
        tick.beta[0] = BetaVec{};
        rec.ticks.push_back(std::move(tick));
    }
    return rec;
}

}  // namespace

TEST_CASE("encode: lone ego attends to itself and still updates the latent") {
    std::mt19937_64 rng(401);
    InstantModule mod(small_cfg(), rng);
    Observation obs;
    obs.ego = {0, 0.5, -0.5, 0.1, 0.0};
    obs.neighbors.assign(3, EntityState{});
    obs.present.assign(3, false);
    std::vector<double> prev(5, 0.0);
    auto res = mod.encode(obs, {}, prev);
    CHECK(res.attention.at(0, 0) == doctest::Approx(1.0));
    for (int i = 1; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(res.attention.at(i, j) == 0.0);
    bool moved = false;
    for (double z : res.zeta) moved = moved || z != 0.0;
    CHECK(moved);
}

TEST_CASE("encode: swapping identical neighbor slots leaves the latent unchanged") {
    std::mt19937_64 rng(403);
    InstantModule mod(small_cfg(), rng);
    Observation obs = random_obs(3, 2, rng);
    // make slots 0 and 1 identical twins (same state, same latent, same id)
    obs.neighbors[1] = obs.neighbors[0];
    auto betas = random_betas(3, rng);
    betas[obs.neighbors[1].id] = betas[obs.neighbors[0].id];
    std::vector<double> prev = {0.1, -0.2, 0.3, 0.0, 0.05};
    auto a = mod.encode(obs, betas, prev);
    std::swap(obs.neighbors[0], obs.neighbors[1]);
    auto b = mod.encode(obs, betas, prev);
    for (size_t i = 0; i < a.zeta.size(); ++i)
        CHECK(a.zeta[i] == doctest::Approx(b.zeta[i]).epsilon(1e-14));
}

TEST_CASE("encode: matches the composed GAT + GRU oracle to 1e-12") {
    std::mt19937_64 rng(405);
    InstantConfig cfg = small_cfg();
    InstantModule mod(cfg, rng);
    Observation obs = random_obs(3, 3, rng);
    auto betas = random_betas(3, rng);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> prev(5);
    for (auto& v : prev) v = u(rng);

    auto res = mod.encode(obs, betas, prev);

    // oracle: node features = [scaled state || beta], complete present graph
    FeatureScales scales;
    auto feat_of = [&](const EntityState& st, bool is_ego) {
        StateFeature sf = entity_features(st, is_ego, scales);
        std::vector<double> f(sf.begin(), sf.end());
        const BetaVec& b = betas.at(st.id);
        f.insert(f.end(), b.begin(), b.end());
        return f;
    };
    oracle::GatRef gat_ref;
    gat_ref.slope = mod.gat().leaky_slope;
    for (int r = 0; r < cfg.gat_hidden; ++r) {
        std::vector<double> row;
        for (int c = 0; c < kStateDim + kBetaDim; ++c) row.push_back(mod.gat().w->value.at(r, c));
        gat_ref.w.push_back(row);
    }
    gat_ref.a_src = mod.gat().a_src->value.to_vector();
    gat_ref.a_dst = mod.gat().a_dst->value.to_vector();

    std::vector<std::vector<double>> feats = {feat_of(obs.ego, true)};
    for (int s = 0; s < 3; ++s) feats.push_back(feat_of(obs.neighbors[static_cast<size_t>(s)], false));
    auto gat_out = oracle::gat_reference(gat_ref, feats, {true, true, true, true});

    std::vector<double> pooled(static_cast<size_t>(cfg.gat_hidden), 0.0);
    for (int i = 0; i < 4; ++i)
        for (int d = 0; d < cfg.gat_hidden; ++d)
            pooled[static_cast<size_t>(d)] += gat_out.out[static_cast<size_t>(i)][static_cast<size_t>(d)] / 4.0;

    auto gru_of = [](const iplan::num::GruParams& p) {
        auto mat = [](const Var& v) {
            std::vector<std::vector<double>> out(static_cast<size_t>(v->value.dim(0)));
            for (int r = 0; r < v->value.dim(0); ++r)
                for (int c = 0; c < v->value.dim(1); ++c)
                    out[static_cast<size_t>(r)].push_back(v->value.at(r, c));
            return out;
        };
        oracle::GruRef ref;
        ref.wz = mat(p.wz); ref.uz = mat(p.uz); ref.bz = p.bz->value.to_vector();
        ref.wr = mat(p.wr); ref.ur = mat(p.ur); ref.br = p.br->value.to_vector();
        ref.wn = mat(p.wn); ref.un = mat(p.un); ref.bn = p.bn->value.to_vector();
        return ref;
    };
    auto want = oracle::gru_reference(gru_of(mod.enc_gru()), pooled, prev);
    for (size_t i = 0; i < want.size(); ++i) CHECK(std::abs(res.zeta[i] - want[i]) < 1e-12);

    // attention itself matches too
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(std::abs(res.attention.at(i, j) -
                           gat_out.attention[static_cast<size_t>(i)][static_cast<size_t>(j)]) < 1e-12);
}

TEST_CASE("predict: shape contract and autoregressive chain vs scalar oracle") {
    std::mt19937_64 rng(407);
    InstantConfig cfg = small_cfg(3, 3);
    InstantModule mod(cfg, rng);
    Observation obs = random_obs(3, 2, rng);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::vector<double> zeta(5);
    for (auto& v : zeta) v = u(rng);

    auto frames = mod.predict_trajectories(obs, zeta);
    REQUIRE(static_cast<int>(frames.size()) == cfg.t_p);
    const int fdim = (1 + 3) * kStateDim;
    for (const auto& f : frames) {
        CHECK(static_cast<int>(f.size()) == fdim);
        for (double v : f) CHECK(std::isfinite(v));
    }

    // scalar oracle: same GRU chain, delta readout, frame k+1 consumes frame k
    auto gru_of = [](const iplan::num::GruParams& p) {
        auto mat = [](const Var& v) {
            std::vector<std::vector<double>> out(static_cast<size_t>(v->value.dim(0)));
            for (int r = 0; r < v->value.dim(0); ++r)
                for (int c = 0; c < v->value.dim(1); ++c)
                    out[static_cast<size_t>(r)].push_back(v->value.at(r, c));
            return out;
        };
        oracle::GruRef ref;
        ref.wz = mat(p.wz); ref.uz = mat(p.uz); ref.bz = p.bz->value.to_vector();
        ref.wr = mat(p.wr); ref.ur = mat(p.ur); ref.br = p.br->value.to_vector();
        ref.wn = mat(p.wn); ref.un = mat(p.un); ref.bn = p.bn->value.to_vector();
        return ref;
    };
    oracle::GruRef dec = gru_of(mod.dec_gru());
    std::vector<double> frame = obs_frame(obs, FeatureScales{});
    std::vector<double> h(5, 0.0);
    for (size_t i = 0; i < zeta.size(); ++i) h[i] = zeta[i];
    for (int k = 0; k < cfg.t_p; ++k) {
        h = oracle::gru_reference(dec, frame, h);
        for (int d = 0; d < fdim; ++d) {
            double delta = mod.dec_out().b->value[d];
            for (int c = 0; c < 5; ++c) delta += mod.dec_out().w->value.at(d, c) * h[static_cast<size_t>(c)];
            frame[static_cast<size_t>(d)] += delta;
        }
        for (int d = 0; d < fdim; ++d)
            CHECK(std::abs(frames[static_cast<size_t>(k)][static_cast<size_t>(d)] -
                           frame[static_cast<size_t>(d)]) < 1e-12);
    }
}

TEST_CASE("t_p = 1 gives a single frame with no recursion") {
    std::mt19937_64 rng(409);
    InstantModule mod(small_cfg(3, 1), rng);
    Observation obs = random_obs(3, 2, rng);
    auto frames = mod.predict_trajectories(obs, std::vector<double>(5, 0.1));
    CHECK(frames.size() == 1);
}

TEST_CASE("loss: perfect prediction gives zero; one coordinate off costs 3/(N t_p)") {
    using iplan::num::masked_l1;
    const int n = 4, t_p = 5;
    Tensor pred({n, 3}), target({n, 3}), weight({n, 3});
    std::mt19937_64 rng(411);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int64_t i = 0; i < pred.size(); ++i) pred[i] = target[i] = u(rng);
    weight.fill(1.0 / (n * t_p));
    CHECK(masked_l1(iplan::num::constant(pred), target, weight)->value[0] == 0.0);
    pred[5] += 3.0;
    CHECK(masked_l1(iplan::num::constant(pred), target, weight)->value[0] ==
          doctest::Approx(3.0 / (n * t_p)).epsilon(1e-12));
}

TEST_CASE("loss: sum over opponents is symmetric under relabeling") {
    // the L1 objective given (predictions, truths) must not care how the
    // opponent index j is assigned; permute whole rows of both sides
    using iplan::num::masked_l1;
    std::mt19937_64 rng(413);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const int n = 6, d = 5;
    Tensor pred({n, d}), target({n, d}), weight({n, d});
    for (int64_t i = 0; i < pred.size(); ++i) {
        pred[i] = u(rng);
        target[i] = u(rng);
        weight[i] = (rng() % 4 == 0) ? 0.0 : 1.0 / (n * d);
    }
    double base = masked_l1(iplan::num::constant(pred), target, weight)->value[0];
    std::vector<int> perm = {3, 0, 5, 1, 4, 2};
    Tensor pp({n, d}), tp({n, d}), wp({n, d});
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < d; ++c) {
            pp.at(r, c) = pred.at(perm[static_cast<size_t>(r)], c);
            tp.at(r, c) = target.at(perm[static_cast<size_t>(r)], c);
            wp.at(r, c) = weight.at(perm[static_cast<size_t>(r)], c);
        }
    double permuted = masked_l1(iplan::num::constant(pp), tp, wp)->value[0];
    CHECK(base == doctest::Approx(permuted).epsilon(1e-12));
}

TEST_CASE("zeta replay is deterministic") {
    std::mt19937_64 rng(415);
    InstantModule mod(small_cfg(3, 2), rng);
    mod.set_feature_scales(FeatureScales{});
    auto rec = constant_velocity_record(12, 3, 3, 77);
    auto s1 = mod.replay_latents(rec);
    auto s2 = mod.replay_latents(rec);
    CHECK(s1 == s2);
    CHECK(s1.size() == 12);
}

TEST_CASE("train_step: zero learning rate leaves parameters unchanged") {
    std::mt19937_64 rng(417);
    InstantConfig cfg = small_cfg(3, 2);
    cfg.lr = 0.0;
    InstantModule mod(cfg, rng);
    mod.set_feature_scales(FeatureScales{});
    auto params = mod.parameters();
    std::vector<Tensor> snap;
    for (const Var& p : params) snap.push_back(p->value);
    auto rec = constant_velocity_record(10, 3, 3, 5);
    const iplan::env::EpisodeRecord* recs[] = {&rec};
    std::mt19937_64 drng(3);
    auto res = mod.train_step(std::span<const iplan::env::EpisodeRecord* const>(recs, 1), drng);
    REQUIRE(res.has_value());
    for (size_t i = 0; i < params.size(); ++i)
        for (int64_t j = 0; j < params[i]->value.size(); ++j)
            CHECK(params[i]->value[j] == snap[i][j]);
}

TEST_CASE("instant loss gradients match finite differences") {
    std::mt19937_64 rng(419);
    InstantConfig cfg;
    cfg.capacity = 2;
    cfg.gat_hidden = 4;
    cfg.zeta_dim = 4;
    cfg.dec_hidden = 4;
    cfg.t_p = 2;
    InstantModule mod(cfg, rng);
    mod.set_feature_scales(FeatureScales{});
    auto rec = constant_velocity_record(6, 2, 2, 31);
    const iplan::env::EpisodeRecord* recs[] = {&rec};
    std::span<const iplan::env::EpisodeRecord* const> span(recs, 1);
    std::mt19937_64 drng(9);
    auto table = mod.prepare_anchors(span);
    auto build = [&]() { return mod.build_loss_from(table, false, drng); };
    CHECK(oracle::fd_max_rel_error(mod.parameters(), build) < 1e-4);
}

TEST_CASE("supervised descent on a fixed synthetic batch") {
    std::mt19937_64 rng(421);
    InstantConfig cfg = small_cfg(3, 2);
    cfg.lr = 1e-3;
    InstantModule mod(cfg, rng);
    mod.set_feature_scales(FeatureScales{});
    auto rec = constant_velocity_record(16, 3, 3, 91);
    const iplan::env::EpisodeRecord* recs[] = {&rec};
    std::span<const iplan::env::EpisodeRecord* const> span(recs, 1);
    std::mt19937_64 drng(13), eval_rng(0);
    double initial = mod.build_loss(span, false, eval_rng)->value[0];
    for (int i = 0; i < 200; ++i) REQUIRE(mod.train_step(span, drng).has_value());
    double final_loss = mod.build_loss(span, false, eval_rng)->value[0];
    CHECK(final_loss < 0.5 * initial);
}
