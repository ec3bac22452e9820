#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iplan/env/log.hpp"

namespace iplan::metrics {

struct Ci {
    double mean = 0.0;
    double half_width = 0.0;
};

/// Student-t interval on the mean; requires n >= 2.
Ci confidence_interval(std::span<const double> samples, double level = 0.95);

/// Percentage of controlled agents that stay collision-free to episode end.
double success_rate(std::span<const env::EpisodeLog> logs);

/// Mean ticks before crash, horizon if the agent never crashes.
double survival_time(std::span<const env::EpisodeLog> logs);

/// Mean per-tick speed over each agent's alive ticks, averaged over
/// agent-episodes. Highway logs only; throws Error on navigation logs.
double average_speed(std::span<const env::EpisodeLog> logs);

/// Per-episode samples (mean over controlled agents) for interval estimates.
std::vector<double> episode_reward_samples(std::span<const env::EpisodeLog> logs);
std::vector<double> episode_speed_samples(std::span<const env::EpisodeLog> logs);
std::vector<double> episode_survival_samples(std::span<const env::EpisodeLog> logs);
std::vector<double> episode_success_samples(std::span<const env::EpisodeLog> logs);

/// One row of the metric table; speed/success are empty for navigation.
struct MetricRow {
    std::string algo;
    std::string env;
    std::string scenario;
    int episodes = 0;
    Ci episodic_reward;
    std::optional<Ci> avg_speed;
    Ci survival;
    Ci success;
};

MetricRow summarize(std::span<const env::EpisodeLog> logs, const std::string& algo,
                    const std::string& env_name, const std::string& scenario);

/// Stable, documented column order:
/// algo,env,scenario,episodes,reward_mean,reward_hw,speed_mean,speed_hw,
/// survival_mean,survival_hw,success_mean,success_hw
std::string metric_csv_header();
std::string metric_csv_row(const MetricRow& row);

}  // namespace iplan::metrics
