#include "maestro/rewards.hpp"

namespace maestro::rewards {

int outcome_reward(const protocol::ParsedTrajectory& pt, const env::TaskInstance& task) {
    if (!pt.terminal) return 0;
    auto answer = pt.final_answer();
    return answer && env::judge_answer(task, *answer) ? 1 : 0;
}

int format_reward(const protocol::FormatReport& report) {
    return report.violations.empty() ? 0 : -1;
}

RewardBreakdown total_reward(const protocol::ParsedTrajectory& pt, const env::TaskInstance& task,
                             const protocol::FormatReport& report) {
    RewardBreakdown breakdown;
    breakdown.r_ans = outcome_reward(pt, task);
    breakdown.r_fmt = format_reward(report);
    breakdown.total = breakdown.r_ans + breakdown.r_fmt;
    return breakdown;
}

} // namespace maestro::rewards
