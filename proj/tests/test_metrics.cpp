#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

#include "iplan/eval/metrics.hpp"

using namespace iplan::metrics;
using iplan::env::EpisodeLog;

namespace {

iplan::RunConfig hw_cfg() {
    iplan::RunConfig cfg;
    cfg.env = "highway";
    cfg.scenario = "mild";
    return cfg;
}

// hand-scripted log: one row per tick per agent with the given crash ticks
// (-1 = survives); speeds constant per agent
EpisodeLog scripted_log(const iplan::RunConfig& cfg, const std::vector<int>& crash_tick,
                        const std::vector<double>& speed) {
    EpisodeLog log;
    log.config = cfg;
    log.episode_seed = 1;
    int horizon = cfg.horizon_resolved();
    int n = static_cast<int>(crash_tick.size());
    for (int t = 1; t <= horizon; ++t) {
        for (int a = 0; a < n; ++a) {
            EpisodeLog::Row r;
            r.tick = t;
            r.agent = a;
            int ct = crash_tick[static_cast<size_t>(a)];
            bool done_before = ct >= 0 && t > ct;
            r.collided = (ct == t) ? 1 : 0;
            r.done = (t == horizon || (ct >= 0 && t >= ct)) ? 1 : 0;
            r.reward = done_before ? 0.0 : 0.1;
            r.speed = done_before ? 0.0 : speed[static_cast<size_t>(a)];
            r.lane = 3;
            log.rows.push_back(r);
        }
    }
    return log;
}

}  // namespace

TEST_CASE("confidence interval: identical samples give zero width") {
    std::vector<double> samples(10, 4.2);
    Ci ci = confidence_interval(samples);
    CHECK(ci.mean == doctest::Approx(4.2));
    CHECK(ci.half_width == doctest::Approx(0.0));
}

TEST_CASE("confidence interval: matches the textbook t-interval") {
    std::vector<double> samples = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    Ci ci95 = confidence_interval(samples, 0.95);
    // frozen from an independent statistical oracle
    CHECK(ci95.mean == doctest::Approx(5.5).epsilon(1e-12));
    CHECK(std::abs(ci95.half_width - 2.1658505897216838) < 1e-9);
    Ci ci99 = confidence_interval(samples, 0.99);
    CHECK(std::abs(ci99.half_width - 3.1114806432703013) < 1e-9);
    CHECK(ci99.half_width > ci95.half_width);  // widening the level widens the interval

    std::vector<double> five = {2.0, 4.0, 4.0, 4.0, 5.0};
    Ci c2 = confidence_interval(five, 0.95);
    CHECK(c2.mean == doctest::Approx(3.8));
    CHECK(std::abs(c2.half_width - 1.3601747613165138) < 1e-9);
}

TEST_CASE("confidence interval: fewer than two samples rejected") {
    std::vector<double> one = {1.0};
    CHECK_THROWS_AS(confidence_interval(one), iplan::Error);
}

TEST_CASE("success rate: boundary cases and the counting oracle") {
    auto cfg = hw_cfg();
    std::vector<EpisodeLog> clean = {scripted_log(cfg, {-1, -1, -1, -1, -1}, {25, 25, 25, 25, 25})};
    CHECK(success_rate(clean) == doctest::Approx(100.0));

    std::vector<EpisodeLog> doomed = {scripted_log(cfg, {1, 2, 3, 4, 5}, {25, 25, 25, 25, 25})};
    CHECK(success_rate(doomed) == doctest::Approx(0.0));

    // 64 episodes, 5 agents, pseudo-random crash pattern vs direct counting
    std::mt19937_64 rng(31);
    std::vector<EpisodeLog> logs;
    int survivors = 0, total = 0;
    for (int ep = 0; ep < 64; ++ep) {
        std::vector<int> crash(5);
        for (auto& c : crash) {
            c = (rng() % 3 == 0) ? static_cast<int>(1 + rng() % 90) : -1;
            ++total;
            if (c < 0) ++survivors;
        }
        logs.push_back(scripted_log(cfg, crash, {21, 22, 23, 24, 25}));
    }
    CHECK(success_rate(logs) == doctest::Approx(100.0 * survivors / total).epsilon(1e-12));
}

TEST_CASE("survival time: crash tick or horizon") {
    auto cfg = hw_cfg();
    std::vector<EpisodeLog> clean = {scripted_log(cfg, {-1, -1}, {25, 25})};
    CHECK(survival_time(clean) == doctest::Approx(90.0));

    std::vector<EpisodeLog> one_crash = {scripted_log(cfg, {30, -1}, {25, 25})};
    CHECK(survival_time(one_crash) == doctest::Approx((30.0 + 90.0) / 2.0));

    iplan::RunConfig nav;
    std::vector<EpisodeLog> nav_logs = {scripted_log(nav, {-1, -1, -1}, {0.1, 0.1, 0.1})};
    CHECK(survival_time(nav_logs) == doctest::Approx(50.0));  // capped at the navigation horizon
}

TEST_CASE("average speed: lifetime means; navigation logs rejected") {
    auto cfg = hw_cfg();
    std::vector<EpisodeLog> steady = {scripted_log(cfg, {-1}, {25.0})};
    CHECK(average_speed(steady) == doctest::Approx(25.0));

    // 30 m/s until a crash at tick 45: lifetime average still 30
    std::vector<EpisodeLog> crashes = {scripted_log(cfg, {45}, {30.0})};
    CHECK(average_speed(crashes) == doctest::Approx(30.0));

    // mixed scripted pattern vs the arithmetic oracle
    std::vector<EpisodeLog> mixed = {scripted_log(cfg, {10, -1, 60}, {20.0, 25.0, 30.0})};
    CHECK(average_speed(mixed) == doctest::Approx((20.0 + 25.0 + 30.0) / 3.0));

    iplan::RunConfig nav;
    std::vector<EpisodeLog> nav_logs = {scripted_log(nav, {-1}, {0.2})};
    CHECK_THROWS_AS(average_speed(nav_logs), iplan::Error);
}

TEST_CASE("metric rows: stable csv schema") {
    CHECK(metric_csv_header() ==
          "algo,env,scenario,episodes,reward_mean,reward_hw,speed_mean,speed_hw,"
          "survival_mean,survival_hw,success_mean,success_hw");
    auto cfg = hw_cfg();
    std::vector<EpisodeLog> logs = {scripted_log(cfg, {-1, 20}, {25, 28}),
                                    scripted_log(cfg, {40, -1}, {22, 24})};
    MetricRow row = summarize(logs, "iplan", "highway", "mild");
    CHECK(row.episodes == 2);
    CHECK(row.avg_speed.has_value());
    CHECK(row.success.mean == doctest::Approx(50.0));
    std::string csv = metric_csv_row(row);
    CHECK(csv.find("iplan,highway,mild,2,") == 0);

    iplan::RunConfig nav;
    std::vector<EpisodeLog> nav_logs = {scripted_log(nav, {-1, -1}, {1, 1}),
                                        scripted_log(nav, {-1, -1}, {1, 1})};
    MetricRow nav_row = summarize(nav_logs, "ippo", "navigation", "easy");
    CHECK(!nav_row.avg_speed.has_value());
    // navigation rows leave the speed columns empty
    CHECK(metric_csv_row(nav_row).find(",,") != std::string::npos);
}

TEST_CASE("episode log: serialise/parse round trip with latent lines") {
    auto cfg = hw_cfg();
    EpisodeLog log = scripted_log(cfg, {30, -1}, {25, 28});
    log.latent_lines.push_back("0,0,zeta,0.5,0.25");
    std::string text = log.serialize();
    EpisodeLog back = EpisodeLog::parse(text);
    CHECK(back.episode_seed == log.episode_seed);
    CHECK(back.rows.size() == log.rows.size());
    CHECK(back.config.hash() == log.config.hash());
    CHECK(back.latent_lines == log.latent_lines);
    CHECK(back.serialize() == text);
    // latent lines never affect the replay-comparison form
    CHECK(log.serialize(false).find("latent,") == std::string::npos);

    // stream splitting
    std::string stream = log.serialize() + back.serialize();
    auto parts = EpisodeLog::split_stream(stream);
    CHECK(parts.size() == 2);
    CHECK(EpisodeLog::parse(parts[1]).rows.size() == log.rows.size());
}
