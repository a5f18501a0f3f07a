#pragma once

#include "maestro/environment.hpp"
#include "maestro/protocol.hpp"

namespace maestro::rewards {

// R(tau) = r_ans + r_fmt with r_ans in {0,1} and r_fmt in {-1,0}.
struct RewardBreakdown {
    int r_ans = 0;
    int r_fmt = 0;
    int total = 0;
};

// 1 iff the trajectory terminated with an answer that matches gold.
// Non-terminal episodes (turn budget exhausted) score 0.
int outcome_reward(const protocol::ParsedTrajectory& pt, const env::TaskInstance& task);

// Flat -1 when any protocol constraint is violated, 0 otherwise. Multiple
// simultaneous violations still cost a single -1.
int format_reward(const protocol::FormatReport& report);

RewardBreakdown total_reward(const protocol::ParsedTrajectory& pt, const env::TaskInstance& task,
                             const protocol::FormatReport& report);

} // namespace maestro::rewards
