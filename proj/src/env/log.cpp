#include "iplan/env/log.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "iplan/env/factory.hpp"
#include "iplan/env/highway.hpp"
#include "iplan/env/navigation.hpp"

namespace iplan::env {

std::unique_ptr<Environment> make_env(const RunConfig& cfg) {
    if (cfg.env == "navigation") return std::make_unique<NavigationEnv>(cfg);
    if (cfg.env == "highway") return std::make_unique<HighwayEnv>(cfg);
    throw ConfigError("unknown env: " + cfg.env);
}

namespace {

std::string fmt_d(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

constexpr const char* kColumns = "tick,agent,action,reward,done,collided,speed,lane,px,py,vx,vy";

}  // namespace

std::string EpisodeLog::serialize(bool include_latents) const {
    std::ostringstream os;
    os << "iplan-episode-log " << kVersion << '\n';
    os << "begin-config\n" << config.serialize() << "end-config\n";
    os << "episode-seed " << episode_seed << '\n';
    os << "config-hash " << config.hash() << '\n';
    os << "columns " << kColumns << '\n';
    for (const Row& r : rows) {
        os << r.tick << ',' << r.agent << ',' << r.action << ',' << fmt_d(r.reward) << ','
           << r.done << ',' << r.collided << ',' << fmt_d(r.speed) << ',' << r.lane << ','
           << fmt_d(r.px) << ',' << fmt_d(r.py) << ',' << fmt_d(r.vx) << ',' << fmt_d(r.vy)
           << '\n';
    }
    if (include_latents)
        for (const std::string& l : latent_lines) os << "latent," << l << '\n';
    os << "end-episode\n";
    return os.str();
}

EpisodeLog EpisodeLog::parse(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error("empty episode log");
    {
        std::istringstream hs(line);
        std::string magic;
        int version = -1;
        hs >> magic >> version;
        if (magic != "iplan-episode-log" || version != kVersion)
            throw Error("not a version-" + std::to_string(kVersion) + " episode log");
    }
    EpisodeLog log;
    if (!std::getline(in, line) || line != "begin-config")
        throw Error("episode log: missing config section");
    std::string cfg_text;
    while (std::getline(in, line) && line != "end-config") cfg_text += line + "\n";
    log.config = RunConfig::from_keyvalues(parse_keyvalues(cfg_text));
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line == "end-episode") break;
        std::istringstream ls(line);
        if (line.rfind("episode-seed ", 0) == 0) {
            std::string tag;
            ls >> tag >> log.episode_seed;
        } else if (line.rfind("config-hash ", 0) == 0 || line.rfind("columns ", 0) == 0) {
            continue;
        } else if (line.rfind("latent,", 0) == 0) {
            log.latent_lines.push_back(line.substr(7));
        } else {
            EpisodeLog::Row r;
            char c;
            std::istringstream rs(line);
            rs >> r.tick >> c >> r.agent >> c >> r.action >> c >> r.reward >> c >> r.done >> c >>
                r.collided >> c >> r.speed >> c >> r.lane >> c >> r.px >> c >> r.py >> c >> r.vx >>
                c >> r.vy;
            if (rs.fail()) throw Error("episode log: bad row: " + line);
            log.rows.push_back(r);
        }
    }
    return log;
}

std::vector<std::string> EpisodeLog::split_stream(const std::string& text) {
    std::vector<std::string> out;
    size_t pos = 0;
    const std::string marker = "iplan-episode-log";
    while (pos < text.size()) {
        size_t start = text.find(marker, pos);
        if (start == std::string::npos) break;
        size_t end = text.find("end-episode\n", start);
        if (end == std::string::npos) {
            out.push_back(text.substr(start));
            break;
        }
        end += std::string("end-episode\n").size();
        out.push_back(text.substr(start, end - start));
        pos = end;
    }
    return out;
}

void append_episode_log(const std::string& path, const EpisodeLog& log) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw Error("cannot open episode log for append: " + path);
    out << log.serialize();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool replay_verifies(const EpisodeLog& log) {
    auto env = make_env(log.config);
    env->reset(log.episode_seed);

    EpisodeLog fresh;
    fresh.config = log.config;
    fresh.episode_seed = log.episode_seed;

    // group actions by tick (rows are emitted per agent per tick)
    int n = env->num_agents();
    int max_tick = 0;
    for (const EpisodeLog::Row& r : log.rows) max_tick = std::max(max_tick, r.tick);
    for (int t = 1; t <= max_tick && !env->episode_done(); ++t) {
        std::vector<int> actions(static_cast<size_t>(n), 1);  // idle fallback
        for (const EpisodeLog::Row& r : log.rows)
            if (r.tick == t && r.agent >= 0 && r.agent < n)
                actions[static_cast<size_t>(r.agent)] = r.action;
        StepResult res = env->step(actions);
        auto states = env->entity_states();
        for (int k = 0; k < n; ++k) {
            const AgentStep& s = res.agents[static_cast<size_t>(k)];
            EpisodeLog::Row r;
            r.tick = res.tick;
            r.agent = k;
            r.action = actions[static_cast<size_t>(k)];
            r.reward = s.reward;
            r.done = s.done ? 1 : 0;
            r.collided = s.collided ? 1 : 0;
            r.speed = s.speed;
            r.lane = s.lane;
            r.px = states[static_cast<size_t>(k)].px;
            r.py = states[static_cast<size_t>(k)].py;
            r.vx = states[static_cast<size_t>(k)].vx;
            r.vy = states[static_cast<size_t>(k)].vy;
            fresh.rows.push_back(r);
        }
    }
    return fresh.serialize(false) == log.serialize(false);
}

}  // namespace iplan::env
