#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

namespace alg {

// Filter-strength schedule kappa(t) over sampling time t in [0,1] (t=0 noise,
// t=1 data).  The step schedule holds kappa_star before t_trans and drops to
// exactly 0 at and after it; the zero schedule disables filtering entirely.
enum class ScheduleKind { Step, Zero };

struct StrengthSchedule {
    ScheduleKind kind = ScheduleKind::Step;
    double kappa_star = 2.5;
    double t_trans = 0.1;
    // Number of initial sampler steps forced to strength 0 regardless of
    // kappa(t); applied by the sampler, not by eval_strength.
    int delay_steps = 2;

    static StrengthSchedule step(double kappa_star, double t_trans, int delay_steps = 2) {
        if (kappa_star < 0) throw std::invalid_argument("schedule: kappa_star must be >= 0");
        if (t_trans < 0 || t_trans > 1)
            throw std::invalid_argument("schedule: t_trans must be in [0,1]");
        if (delay_steps < 0) throw std::invalid_argument("schedule: delay_steps must be >= 0");
        return StrengthSchedule{ScheduleKind::Step, kappa_star, t_trans, delay_steps};
    }
    static StrengthSchedule zero() { return StrengthSchedule{ScheduleKind::Zero, 0.0, 0.0, 0}; }
};

inline double eval_strength(const StrengthSchedule& s, double t) {
    if (t < 0 || t > 1) throw std::invalid_argument("eval_strength: t must be in [0,1]");
    if (s.kind == ScheduleKind::Zero) return 0.0;
    return t < s.t_trans ? s.kappa_star : 0.0;
}

struct ScheduleCheck {
    bool monotone = true;
    // First offending pair when not monotone.
    double t_before = 0, t_after = 0;
    double k_before = 0, k_after = 0;
};

// Verifies kappa is non-increasing across an ascending time grid.  Accepts any
// strength function so that hand-built pathological schedules can be checked.
inline ScheduleCheck validate_schedule(const std::function<double(double)>& strength,
                                       const std::vector<double>& grid) {
    ScheduleCheck out;
    for (size_t i = 1; i < grid.size(); ++i) {
        if (grid[i] < grid[i - 1])
            throw std::invalid_argument("validate_schedule: grid must be ascending");
        double a = strength(grid[i - 1]), b = strength(grid[i]);
        if (b > a) {
            out.monotone = false;
            out.t_before = grid[i - 1];
            out.t_after = grid[i];
            out.k_before = a;
            out.k_after = b;
            return out;
        }
    }
    return out;
}

inline ScheduleCheck validate_schedule(const StrengthSchedule& s,
                                       const std::vector<double>& grid) {
    return validate_schedule([&s](double t) { return eval_strength(s, t); }, grid);
}

}  // namespace alg
