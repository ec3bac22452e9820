#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iplan/config.hpp"
#include "iplan/env/core.hpp"

namespace iplan::env {

/// Self-describing episode log: embeds the resolved run config and episode
/// seed so the episode can be re-simulated and verified bit-for-bit.
struct EpisodeLog {
    static constexpr int kVersion = 1;

    RunConfig config;
    uint64_t episode_seed = 0;

    struct Row {
        int tick = 0;
        int agent = 0;
        int action = 0;
        double reward = 0.0;
        int done = 0;
        int collided = 0;
        double speed = 0.0;
        int lane = -1;
        double px = 0.0, py = 0.0, vx = 0.0, vy = 0.0;
    };
    std::vector<Row> rows;
    // optional per-tick latent dumps; ignored by replay verification
    std::vector<std::string> latent_lines;

    std::string serialize(bool include_latents = true) const;
    static EpisodeLog parse(const std::string& text);

    /// Splits a concatenated stream of logs into individual episodes.
    static std::vector<std::string> split_stream(const std::string& text);
};

void append_episode_log(const std::string& path, const EpisodeLog& log);
std::string read_file(const std::string& path);

/// Re-simulates the logged episode from its embedded config and seed and
/// compares the regenerated log bytes (latents stripped). Returns true when
/// identical.
bool replay_verifies(const EpisodeLog& log);

}  // namespace iplan::env
