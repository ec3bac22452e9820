#include "iplan/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

namespace iplan::metrics {

namespace {

// per-agent episode summary extracted from one log
struct AgentSummary {
    double total_reward = 0.0;
    double speed_sum = 0.0;
    int alive_ticks = 0;
    int survival = 0;
    bool collided = false;
};

std::map<int, AgentSummary> summarize_log(const env::EpisodeLog& log) {
    std::map<int, AgentSummary> agents;
    int horizon = log.config.horizon_resolved();
    std::map<int, bool> done_seen;
    for (const env::EpisodeLog::Row& r : log.rows) {
        AgentSummary& s = agents[r.agent];
        if (done_seen[r.agent]) continue;  // past this agent's lifetime
        s.total_reward += r.reward;
        s.speed_sum += r.speed;
        s.alive_ticks += 1;
        if (r.collided && !s.collided) {  // first collision sets the survival tick
            s.collided = true;
            s.survival = r.tick;
        }
        if (r.done) {
            if (!s.collided) s.survival = horizon;
            done_seen[r.agent] = true;
        }
    }
    for (auto& [id, s] : agents)
        if (s.survival == 0 && !s.collided) s.survival = horizon;
    return agents;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

Ci confidence_interval(std::span<const double> samples, double level) {
    size_t n = samples.size();
    if (n < 2) throw Error("confidence_interval requires at least two samples");
    double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : samples) ss += (x - mean) * (x - mean);
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    boost::math::students_t dist(static_cast<double>(n - 1));
    double t = boost::math::quantile(dist, 0.5 + level / 2.0);
    return {mean, t * sd / std::sqrt(static_cast<double>(n))};
}

std::vector<double> episode_reward_samples(std::span<const env::EpisodeLog> logs) {
    std::vector<double> out;
    for (const auto& log : logs) {
        auto agents = summarize_log(log);
        std::vector<double> vals;
        for (const auto& [id, s] : agents) vals.push_back(s.total_reward);
        out.push_back(mean_of(vals));
    }
    return out;
}

std::vector<double> episode_speed_samples(std::span<const env::EpisodeLog> logs) {
    std::vector<double> out;
    for (const auto& log : logs) {
        if (log.config.env != "highway")
            throw Error("average speed is only defined for highway logs");
        auto agents = summarize_log(log);
        std::vector<double> vals;
        for (const auto& [id, s] : agents)
            if (s.alive_ticks > 0) vals.push_back(s.speed_sum / s.alive_ticks);
        out.push_back(mean_of(vals));
    }
    return out;
}

std::vector<double> episode_survival_samples(std::span<const env::EpisodeLog> logs) {
    std::vector<double> out;
    for (const auto& log : logs) {
        auto agents = summarize_log(log);
        std::vector<double> vals;
        for (const auto& [id, s] : agents) vals.push_back(static_cast<double>(s.survival));
        out.push_back(mean_of(vals));
    }
    return out;
}

std::vector<double> episode_success_samples(std::span<const env::EpisodeLog> logs) {
    std::vector<double> out;
    for (const auto& log : logs) {
        auto agents = summarize_log(log);
        int ok = 0, total = 0;
        for (const auto& [id, s] : agents) {
            ++total;
            if (!s.collided) ++ok;
        }
        out.push_back(total > 0 ? 100.0 * ok / total : 0.0);
    }
    return out;
}

double success_rate(std::span<const env::EpisodeLog> logs) {
    if (logs.empty()) throw Error("success_rate needs at least one episode");
    int ok = 0, total = 0;
    for (const auto& log : logs) {
        auto agents = summarize_log(log);
        for (const auto& [id, s] : agents) {
            ++total;
            if (!s.collided) ++ok;
        }
    }
    return total > 0 ? 100.0 * ok / total : 0.0;
}

double survival_time(std::span<const env::EpisodeLog> logs) {
    if (logs.empty()) throw Error("survival_time needs at least one episode");
    double sum = 0.0;
    int count = 0;
    for (const auto& log : logs) {
        auto agents = summarize_log(log);
        for (const auto& [id, s] : agents) {
            sum += s.survival;
            ++count;
        }
    }
    return count > 0 ? sum / count : 0.0;
}

double average_speed(std::span<const env::EpisodeLog> logs) {
    if (logs.empty()) throw Error("average_speed needs at least one episode");
    double sum = 0.0;
    int count = 0;
    for (const auto& log : logs) {
        if (log.config.env != "highway")
            throw Error("average speed is only defined for highway logs");
        auto agents = summarize_log(log);
        for (const auto& [id, s] : agents) {
            if (s.alive_ticks == 0) continue;
            sum += s.speed_sum / s.alive_ticks;
            ++count;
        }
    }
    return count > 0 ? sum / count : 0.0;
}

MetricRow summarize(std::span<const env::EpisodeLog> logs, const std::string& algo,
                    const std::string& env_name, const std::string& scenario) {
    MetricRow row;
    row.algo = algo;
    row.env = env_name;
    row.scenario = scenario;
    row.episodes = static_cast<int>(logs.size());
    auto rewards = episode_reward_samples(logs);
    row.episodic_reward = confidence_interval(rewards);
    auto survival = episode_survival_samples(logs);
    row.survival = confidence_interval(survival);
    auto success = episode_success_samples(logs);
    row.success = confidence_interval(success);
    if (env_name == "highway") {
        auto speed = episode_speed_samples(logs);
        row.avg_speed = confidence_interval(speed);
    }
    return row;
}

namespace {
std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace

std::string metric_csv_header() {
    return "algo,env,scenario,episodes,reward_mean,reward_hw,speed_mean,speed_hw,"
           "survival_mean,survival_hw,success_mean,success_hw";
}

std::string metric_csv_row(const MetricRow& row) {
    std::string speed_mean, speed_hw;
    if (row.avg_speed) {
        speed_mean = fmt(row.avg_speed->mean);
        speed_hw = fmt(row.avg_speed->half_width);
    }
    return row.algo + "," + row.env + "," + row.scenario + "," + std::to_string(row.episodes) +
           "," + fmt(row.episodic_reward.mean) + "," + fmt(row.episodic_reward.half_width) + "," +
           speed_mean + "," + speed_hw + "," + fmt(row.survival.mean) + "," +
           fmt(row.survival.half_width) + "," + fmt(row.success.mean) + "," +
           fmt(row.success.half_width);
}

}  // namespace iplan::metrics
