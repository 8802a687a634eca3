#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kt/matrix.hpp"

namespace kt {

/// Leakage-safe gather indices and attention permissions for one sequence of
/// task container ids. Container runs are maximal blocks of equal *adjacent*
/// ids, so a reused id later in the sequence starts a new run.
///
/// allowed[i][j] == true iff query position i may attend key position j:
/// max(0, starts[i] - window) <= j <= starts[i] - 1. Every permitted key
/// therefore lies strictly before i's run, which is what blocks
/// inter-container leakage.
struct ContainerPlan {
    std::vector<std::int64_t> containers;
    std::vector<int> starts;       // starts[i] = first index of i's run
    std::vector<int> shift_index;  // starts[i] - 1, or -1 when the run is first
    BoolMatrix allowed;
    int window = 0;
};

std::vector<int> container_starts(std::span<const std::int64_t> containers);
std::vector<int> shift_indices(std::span<const std::int64_t> containers);
BoolMatrix attention_allowed(std::span<const std::int64_t> containers, int window);

ContainerPlan make_plan(std::span<const std::int64_t> containers, int window);

/// Brute-force oracle with the same contract as make_plan. Each (i, j) cell
/// is decided independently by local scans over the id sequence; no shared
/// run/prefix arrays with the fast path.
ContainerPlan reference_plan(std::span<const std::int64_t> containers, int window);

/// output[i] = states[shift_index[i]], or a zero vector for index -1.
std::vector<std::vector<double>> gather_shifted(const std::vector<std::vector<double>>& states,
                                                std::span<const int> shift_index);

/// Render the mask in the printed convention: 1 = blocked.
std::vector<std::vector<int>> mask_blocked_polarity(const BoolMatrix& allowed);

}  // namespace kt
