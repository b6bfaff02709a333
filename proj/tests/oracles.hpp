#pragma once

// Independent reference computations used by the unit and acceptance tests. Nothing
// here calls into the library code it is meant to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

inline constexpr int kTemps = 11;
inline constexpr int kModules = 4;
inline constexpr double kTempStart = 80.0;
inline constexpr double kTempStep = 11.0;

// Action id = module * 11 + temperature index; modules PP=0, SJR=1, DEP=2, SP=3.
inline int module_of(int action) { return action / kTemps; }
inline double temp_of(int action) { return kTempStart + kTempStep * (action % kTemps); }

struct DesignCheck {
    int sjr = 0;
    int dep = 0;
    int continuity_breaks = 0;
    [[nodiscard]] bool ok(int max_sjr = 6, int min_dep = 3) const {
        return sjr <= max_sjr && dep >= min_dep && continuity_breaks == 0;
    }
};

/// Counts SJR and DEP modules and DEP/SP positions (after the first) whose temperature
/// differs from the previous module's.
inline DesignCheck check_design(const std::vector<int>& actions) {
    DesignCheck c;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        const int m = module_of(actions[i]);
        if (m == 1) {
            ++c.sjr;
        }
        if (m == 2) {
            ++c.dep;
        }
        if (i > 0 && (m == 2 || m == 3) && temp_of(actions[i]) != temp_of(actions[i - 1])) {
            ++c.continuity_breaks;
        }
    }
    return c;
}

/// Reward of an episode against a baseline energy.
inline double reward(bool done, bool truncated, double q, double q_baseline, double penalty = 1000.0) {
    if (done) {
        return q_baseline - q;
    }
    if (truncated) {
        return q_baseline - q - penalty;
    }
    return 0.0;
}

/// y = W^T x + b for W stored row-major as [in][out], accumulated output by output.
inline std::vector<double> matvec(const std::vector<double>& w, const std::vector<double>& b,
                                  const std::vector<double>& x, int in, int out) {
    std::vector<double> y(out);
    for (int j = 0; j < out; ++j) {
        long double acc = b[j];
        for (int i = 0; i < in; ++i) {
            acc += static_cast<long double>(w[static_cast<std::size_t>(i) * out + j]) * x[i];
        }
        y[j] = static_cast<double>(acc);
    }
    return y;
}

/// Probabilities p_i = exp(z_i) / Σ exp(z_j) computed without log-space tricks beyond a shift.
inline std::vector<double> softmax(const std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - m);
        s += p[i];
    }
    for (double& v : p) {
        v /= s;
    }
    return p;
}

/// Steps simulated by a prefix-cached beam run (one new step per beam per depth) and
/// steps replayed without a cache (every earlier position of every rollout).
inline long long cached_steps(long long T, long long n_b) { return T * n_b; }
inline long long uncached_replayed_steps(long long T, long long n_b) {
    long long total = 0;
    for (long long d = 1; d <= T; ++d) {
        total += (d - 1) * n_b;
    }
    return total;
}

}  // namespace oracle
