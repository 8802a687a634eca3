#include "kt/plan.hpp"

#include <algorithm>
#include <stdexcept>

namespace kt {

std::vector<int> container_starts(std::span<const std::int64_t> containers) {
    const int n = static_cast<int>(containers.size());
    std::vector<int> starts(n);
    int run_start = 0;
    for (int i = 0; i < n; ++i) {
        if (i > 0 && containers[i] != containers[i - 1]) run_start = i;
        starts[i] = run_start;
    }
    return starts;
}

std::vector<int> shift_indices(std::span<const std::int64_t> containers) {
    std::vector<int> starts = container_starts(containers);
    std::vector<int> shift(starts.size());
    for (std::size_t i = 0; i < starts.size(); ++i) {
        shift[i] = starts[i] > 0 ? starts[i] - 1 : -1;
    }
    return shift;
}

BoolMatrix attention_allowed(std::span<const std::int64_t> containers, int window) {
    if (window < 1) throw std::invalid_argument("attention_allowed: window must be >= 1");
    const std::vector<int> starts = container_starts(containers);
    const int n = static_cast<int>(containers.size());
    BoolMatrix allowed(n, n);
    for (int i = 0; i < n; ++i) {
        const int hi = starts[i];  // exclusive
        const int lo = std::max(0, hi - window);
        for (int j = lo; j < hi; ++j) allowed.set(i, j, true);
    }
    return allowed;
}

ContainerPlan make_plan(std::span<const std::int64_t> containers, int window) {
    ContainerPlan plan;
    plan.containers.assign(containers.begin(), containers.end());
    plan.starts = container_starts(containers);
    plan.shift_index = shift_indices(containers);
    plan.allowed = attention_allowed(containers, window);
    plan.window = window;
    return plan;
}

namespace {

// Run membership decided locally: i and j share a run iff every adjacent pair
// between them carries the same id.
bool same_run(std::span<const std::int64_t> c, int i, int j) {
    const int lo = std::min(i, j);
    const int hi = std::max(i, j);
    for (int k = lo; k < hi; ++k) {
        if (c[k] != c[k + 1]) return false;
    }
    return true;
}

int run_start_scan(std::span<const std::int64_t> c, int i) {
    int s = i;
    while (s > 0 && c[s - 1] == c[s]) --s;
    return s;
}

}  // namespace

ContainerPlan reference_plan(std::span<const std::int64_t> containers, int window) {
    if (window < 1) throw std::invalid_argument("reference_plan: window must be >= 1");
    const int n = static_cast<int>(containers.size());
    ContainerPlan plan;
    plan.containers.assign(containers.begin(), containers.end());
    plan.window = window;
    plan.starts.resize(n);
    plan.shift_index.resize(n);
    plan.allowed = BoolMatrix(n, n);
    for (int i = 0; i < n; ++i) {
        plan.starts[i] = run_start_scan(containers, i);
        for (int j = 0; j < n; ++j) {
            // j is attendable from i iff it precedes i's run and at most
            // `window` positions separate it from the run start.
            const bool before_run = j < i && !same_run(containers, i, j);
            int between = 0;  // positions k with j < k < start of i's run
            for (int k = j + 1; k < i; ++k) {
                if (!same_run(containers, i, k)) ++between;
            }
            plan.allowed.set(i, j, before_run && between < window);
        }
        int shift = -1;
        for (int j = i - 1; j >= 0; --j) {
            if (plan.allowed.at(i, j)) {
                shift = j;
                break;
            }
        }
        plan.shift_index[i] = shift;
    }
    return plan;
}

std::vector<std::vector<double>> gather_shifted(const std::vector<std::vector<double>>& states,
                                                std::span<const int> shift_index) {
    const int n = static_cast<int>(states.size());
    std::vector<std::vector<double>> out(shift_index.size());
    const std::size_t width = states.empty() ? 0 : states.front().size();
    for (std::size_t i = 0; i < shift_index.size(); ++i) {
        const int s = shift_index[i];
        if (s == -1) {
            out[i].assign(width, 0.0);
        } else if (s >= 0 && s < n) {
            out[i] = states[s];
        } else {
            throw std::out_of_range("gather_shifted: shift index " + std::to_string(s) +
                                    " out of range for " + std::to_string(n) + " states");
        }
    }
    return out;
}

std::vector<std::vector<int>> mask_blocked_polarity(const BoolMatrix& allowed) {
    std::vector<std::vector<int>> out(allowed.rows, std::vector<int>(allowed.cols, 1));
    for (int i = 0; i < allowed.rows; ++i) {
        for (int j = 0; j < allowed.cols; ++j) {
            if (allowed.at(i, j)) out[i][j] = 0;
        }
    }
    return out;
}

}  // namespace kt
