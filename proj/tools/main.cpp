#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "iplan/env/factory.hpp"
#include "iplan/env/highway.hpp"
#include "iplan/env/log.hpp"
#include "iplan/eval/metrics.hpp"
#include "iplan/train/trainer.hpp"
#include "oracles.hpp"

namespace {

// distinct exit codes, documented in the README
constexpr int kOk = 0;
constexpr int kErrOther = 1;
constexpr int kErrUsage = 2;
constexpr int kErrConfig = 3;
constexpr int kErrCheckpoint = 4;
constexpr int kErrReplay = 5;

using namespace iplan;

int cmd_train(const std::string& config_path, const std::string& algo,
              const std::string& scenario, const std::string& env_name, int64_t seed,
              int64_t steps, const std::string& out) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
    if (!env_name.empty()) cfg.env = env_name;
    if (!algo.empty()) cfg.algo = algo;
    if (!scenario.empty()) cfg.scenario = scenario;
    if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
    if (steps >= 0) cfg.total_steps = steps;
    if (!out.empty()) cfg.out_dir = out;
    cfg.validate();

    train::Trainer trainer(cfg);
    std::cout << "training " << cfg.algo << " on " << cfg.env << "/" << cfg.scenario << " for "
              << cfg.total_steps << " steps (seed " << cfg.seed << ")\n";
    std::string ckpt = trainer.run();
    std::cout << "final checkpoint: " << ckpt << '\n';
    if (trainer.aborted_updates() > 0) {
        std::cerr << trainer.aborted_updates() << " module update(s) were aborted\n";
        return kErrOther;
    }
    return kOk;
}

int cmd_eval(const std::string& ckpt_path, int episodes, int64_t seed, const std::string& out) {
    auto trainer = train::Trainer::from_checkpoint(ckpt_path);
    auto outcome = trainer->evaluate(episodes, static_cast<uint64_t>(seed));
    std::ostringstream csv;
    csv << metrics::metric_csv_header() << '\n' << metrics::metric_csv_row(outcome.row) << '\n';
    std::cout << csv.str();
    if (!out.empty()) {
        std::filesystem::create_directories(out);
        std::ofstream(out + "/metrics.csv") << csv.str();
        std::string log_path = out + "/eval_episodes.log";
        std::ofstream clear(log_path);
        clear.close();
        for (const auto& log : outcome.logs) env::append_episode_log(log_path, log);
        std::cout << "episode logs: " << log_path << '\n';
    }
    return kOk;
}

int cmd_replay(const std::string& log_path, int index) {
    std::string text = env::read_file(log_path);
    auto episodes = env::EpisodeLog::split_stream(text);
    if (episodes.empty()) throw Error("no episode logs found in " + log_path);
    if (index < 0 || index >= static_cast<int>(episodes.size()))
        throw Error("episode index out of range (file holds " +
                    std::to_string(episodes.size()) + ")");
    env::EpisodeLog log = env::EpisodeLog::parse(episodes[static_cast<size_t>(index)]);
    if (!env::replay_verifies(log)) {
        std::cerr << "replay mismatch: re-simulated episode differs from the log\n";
        return kErrReplay;
    }
    std::cout << "replay verified: episode " << index << " of " << log_path << " ("
              << log.rows.size() << " rows)\n";
    return kOk;
}

int cmd_report(const std::string& in_dir, const std::string& out_dir, bool plot) {
    std::string rewards_path = in_dir + "/rewards.csv";
    std::ifstream in(rewards_path);
    if (!in) throw Error("cannot read " + rewards_path);
    std::string out = out_dir.empty() ? in_dir : out_dir;
    std::filesystem::create_directories(out);

    // per-episode mean reward across agents, plus a rolling mean
    std::string line;
    std::getline(in, line);  // header
    std::map<int64_t, std::pair<double, int>> per_episode;
    std::map<int64_t, int64_t> step_of;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        int64_t episode, end_step;
        int agent;
        double reward;
        char c;
        ls >> episode >> c >> end_step >> c >> agent >> c >> reward;
        if (ls.fail()) continue;
        per_episode[episode].first += reward;
        per_episode[episode].second += 1;
        step_of[episode] = end_step;
    }
    std::vector<std::pair<int64_t, double>> curve;
    for (const auto& [ep, sum_n] : per_episode)
        curve.emplace_back(ep, sum_n.first / std::max(1, sum_n.second));

    const int window = 50;
    std::ofstream csv(out + "/reward_curve.csv");
    csv << "episode,end_step,mean_reward,rolling_mean\n";
    std::vector<double> recent;
    std::vector<double> rolling_curve;
    for (size_t i = 0; i < curve.size(); ++i) {
        recent.push_back(curve[i].second);
        if (static_cast<int>(recent.size()) > window) recent.erase(recent.begin());
        double rolling = 0.0;
        for (double v : recent) rolling += v;
        rolling /= static_cast<double>(recent.size());
        rolling_curve.push_back(rolling);
        csv << curve[i].first << ',' << step_of[curve[i].first] << ',' << curve[i].second << ','
            << rolling << '\n';
    }
    std::cout << "wrote " << out << "/reward_curve.csv (" << curve.size() << " episodes)\n";

    if (plot && !curve.empty()) {
        // minimal static SVG rendering of the rolling reward curve
        const int width = 900, height = 420, margin = 50;
        double lo = rolling_curve[0], hi = rolling_curve[0];
        for (double v : rolling_curve) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo < 1e-9) hi = lo + 1.0;
        std::ofstream svg(out + "/reward_curve.svg");
        svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
            << height << "'>\n";
        svg << "<rect width='100%' height='100%' fill='white'/>\n";
        svg << "<text x='" << width / 2 << "' y='20' text-anchor='middle'>episodic reward "
            << "(rolling mean, window " << window << ")</text>\n";
        svg << "<line x1='" << margin << "' y1='" << height - margin << "' x2='" << width - margin
            << "' y2='" << height - margin << "' stroke='black'/>\n";
        svg << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
            << height - margin << "' stroke='black'/>\n";
        svg << "<text x='" << margin << "' y='" << margin - 8 << "' font-size='11'>" << hi
            << "</text>\n";
        svg << "<text x='" << margin << "' y='" << height - margin + 14 << "' font-size='11'>"
            << lo << "</text>\n";
        svg << "<polyline fill='none' stroke='tomato' stroke-width='1.5' points='";
        for (size_t i = 0; i < rolling_curve.size(); ++i) {
            double x = margin + (width - 2.0 * margin) * static_cast<double>(i) /
                                    std::max<size_t>(1, rolling_curve.size() - 1);
            double y = height - margin -
                       (height - 2.0 * margin) * (rolling_curve[i] - lo) / (hi - lo);
            svg << x << ',' << y << ' ';
        }
        svg << "'/>\n</svg>\n";
        std::cout << "wrote " << out << "/reward_curve.svg\n";
    }
    return kOk;
}

int selftest_line(const char* name, bool ok) {
    std::printf("[%s] %s\n", ok ? "pass" : "FAIL", name);
    return ok ? 0 : 1;
}

int cmd_selftest() {
    using namespace iplan::num;
    int failures = 0;
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    {  // autodiff vs finite differences on a small MLP
        LinearParams l1 = LinearParams::init(4, 6, rng);
        LinearParams l2 = LinearParams::init(6, 1, rng);
        Tensor x({4});
        for (int i = 0; i < 4; ++i) x[i] = u(rng);
        std::vector<Var> params = {l1.w, l1.b, l2.w, l2.b};
        auto build = [&]() { return sum(linear(l2, tanh_v(linear(l1, constant(x))))); };
        failures += selftest_line("autodiff finite differences (mlp)",
                                  oracle::fd_max_rel_error(params, build) < 1e-4);
    }
    {  // gru against the scalar reference
        GruParams p = GruParams::init(4, 5, rng);
        bool ok = true;
        oracle::GruRef ref;
        auto mat = [](const Var& v) {
            std::vector<std::vector<double>> out(static_cast<size_t>(v->value.dim(0)));
            for (int r = 0; r < v->value.dim(0); ++r)
                for (int c = 0; c < v->value.dim(1); ++c)
                    out[static_cast<size_t>(r)].push_back(v->value.at(r, c));
            return out;
        };
        ref.wz = mat(p.wz); ref.uz = mat(p.uz); ref.bz = p.bz->value.to_vector();
        ref.wr = mat(p.wr); ref.ur = mat(p.ur); ref.br = p.br->value.to_vector();
        ref.wn = mat(p.wn); ref.un = mat(p.un); ref.bn = p.bn->value.to_vector();
        for (int rep = 0; rep < 200 && ok; ++rep) {
            std::vector<double> x(4), h(5);
            for (auto& v : x) v = u(rng);
            for (auto& v : h) v = u(rng);
            Var out = gru_step(p, constant(Tensor::vec(std::vector<double>(x))),
                               constant(Tensor::vec(std::vector<double>(h))));
            auto want = oracle::gru_reference(ref, x, h);
            for (size_t i = 0; i < want.size(); ++i)
                ok = ok && std::abs(out->value[static_cast<int64_t>(i)] - want[i]) < 1e-12;
        }
        failures += selftest_line("gru scalar reference", ok);
    }
    {  // adam closed form
        Var p = leaf(Tensor::vec({0.5}));
        AdamConfig cfg;
        cfg.lr = 1e-2;
        cfg.clip_norm = 0.0;
        Adam opt({p}, cfg);
        oracle::AdamRefState ref;
        double x = 0.5;
        bool ok = true;
        p->ensure_grad();
        for (int i = 0; i < 100 && ok; ++i) {
            double g = u(rng);
            p->grad[0] = g;
            opt.step();
            x = oracle::adam_reference_step(x, g, ref, 1e-2);
            ok = std::abs(p->value[0] - x) < 1e-12;
        }
        failures += selftest_line("adam closed-form reference", ok);
    }
    {  // idm formula
        auto prof = iplan::env::DriverProfile::of(iplan::env::DriverKind::Normal, 5.0);
        bool ok = true;
        for (int i = 0; i < 500 && ok; ++i) {
            double v = 20.0 * (u(rng) + 1.0), vl = 20.0 * (u(rng) + 1.0);
            double gap = 1.0 + 80.0 * (u(rng) + 1.0);
            double got = iplan::env::idm_acceleration(v, vl, gap, prof, 25.0);
            double want = oracle::idm_reference(v, vl, gap, 3.0, 5.0, 10.0, 1.5, 25.0, 6.0);
            ok = std::abs(got - want) < 1e-9;
        }
        failures += selftest_line("idm formula reference", ok);
    }
    {  // gae brute force
        bool ok = true;
        for (int rep = 0; rep < 200 && ok; ++rep) {
            std::vector<iplan::agent::Transition> rollout(12);
            std::vector<double> rewards, values;
            std::vector<bool> dones;
            for (size_t t = 0; t < rollout.size(); ++t) {
                rollout[t].reward = u(rng);
                rollout[t].value = u(rng);
                rollout[t].done = (t % 7) == 6;
                rewards.push_back(rollout[t].reward);
                values.push_back(rollout[t].value);
                dones.push_back(rollout[t].done);
            }
            auto got = iplan::agent::compute_gae(rollout, 0.99, 0.95, 0.123);
            auto want = oracle::gae_reference(rewards, values, dones, 0.123, 0.99, 0.95);
            for (size_t t = 0; t < rollout.size(); ++t)
                ok = ok && std::abs(got.advantages[t] - want.adv[t]) < 1e-12;
        }
        failures += selftest_line("gae brute-force reference", ok);
    }
    {  // rectangle overlap vs polygon oracle
        bool ok = true;
        for (int i = 0; i < 2000 && ok; ++i) {
            double bx = 7.0 * u(rng), by = 3.5 * u(rng), ah = 0.4 * u(rng), bh = 0.4 * u(rng);
            ok = iplan::env::rect_overlap(0, 0, ah, 5, 2, bx, by, bh, 5, 2) ==
                 oracle::rects_intersect_reference(0, 0, ah, 5, 2, bx, by, bh, 5, 2);
        }
        failures += selftest_line("rectangle overlap polygon reference", ok);
    }
    std::printf(failures ? "selftest: %d failure(s)\n" : "selftest: all checks passed\n",
                failures);
    return failures ? kErrOther : kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"iplan: intent-aware decentralized MARL traffic laboratory"};
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "train agents from a config file");
    std::string config_path, algo, scenario, env_name, out_dir;
    int64_t seed = -1, steps = -1;
    train->add_option("--config", config_path, "run configuration file");
    train->add_option("--algo", algo, "iplan | iplan-bm | iplan-gat | ippo");
    train->add_option("--scenario", scenario, "easy|hard or mild|chaotic|chaotic-vh");
    train->add_option("--env", env_name, "navigation | highway");
    train->add_option("--seed", seed, "master seed");
    train->add_option("--steps", steps, "total environment steps");
    train->add_option("--out", out_dir, "output directory");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint over frozen parameters");
    std::string ckpt_path, eval_out;
    int episodes = 64;
    int64_t eval_seed = 1;
    eval->add_option("--checkpoint", ckpt_path, "parameter checkpoint")->required();
    eval->add_option("--episodes", episodes, "evaluation episodes");
    eval->add_option("--seed", eval_seed, "evaluation seed");
    eval->add_option("--out", eval_out, "optional output directory");

    auto* replay = app.add_subcommand("replay", "re-simulate a logged episode and verify");
    std::string log_path;
    int log_index = 0;
    replay->add_option("--log", log_path, "episode log file")->required();
    replay->add_option("--index", log_index, "episode index within the file");

    auto* report = app.add_subcommand("report", "render reward-curve csv (and optional plot)");
    std::string report_in, report_out;
    bool plot = false;
    report->add_option("--in", report_in, "training output directory")->required();
    report->add_option("--out", report_out, "report output directory");
    report->add_flag("--plot", plot, "also write an svg reward curve");

    app.add_subcommand("selftest", "run the bundled oracle suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kErrUsage;
    }

    try {
        if (train->parsed())
            return cmd_train(config_path, algo, scenario, env_name, seed, steps, out_dir);
        if (eval->parsed()) return cmd_eval(ckpt_path, episodes, eval_seed, eval_out);
        if (replay->parsed()) return cmd_replay(log_path, log_index);
        if (report->parsed()) return cmd_report(report_in, report_out, plot);
        return cmd_selftest();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kErrConfig;
    } catch (const CheckpointVersionError& e) {
        std::cerr << "checkpoint error: " << e.what() << '\n';
        return kErrCheckpoint;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kErrOther;
    }
}
