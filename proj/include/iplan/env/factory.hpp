#pragma once

#include <memory>

#include "iplan/config.hpp"
#include "iplan/env/core.hpp"

namespace iplan::env {

std::unique_ptr<Environment> make_env(const RunConfig& cfg);

}  // namespace iplan::env
