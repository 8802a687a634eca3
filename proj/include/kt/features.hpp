#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kt/events.hpp"
#include "kt/matrix.hpp"

namespace kt {

struct StandardStats {
    double mean = 0.0;
    double std = 1.0;
};

struct StandardizationStats {
    StandardStats time_delta;
    StandardStats log_timestamp;
    StandardStats elapsed_time;
};

enum class CountTransform { Raw, Log1p };

/// Scope of the per-tag correctness/lecture blocks in the hand-crafted
/// vector: pooled over the current event's tags (compact) or one slot per
/// tag id (wide).
enum class TagScope { CurrentQuestion, AllTags };

struct FeatureConfig {
    int n_questions = 0;
    int n_lectures = 0;
    int n_tags = 0;
    int seq_len = 1;  // L
    static constexpr int n_parts = 7;
    static constexpr int n_answers = 4;
    double container_delta_divisor = 1000.0;
    StandardizationStats stats;
    double ratio_default = 0.0;
    CountTransform count_transform = CountTransform::Log1p;
    TagScope tag_scope = TagScope::CurrentQuestion;
};

/// Per-position inputs known before the student answers.
/// Real columns, in order: part one-hot (7) | tags multi-hot (n_tags) |
/// correct-answer one-hot (4) | time_delta_std | log_timestamp_std |
/// container_delta_scaled | content_type_delta | position_norm.
/// One-hot blocks are all-zero for lectures. content_index is the embedding
/// row (questions and lectures in disjoint ranges).
struct QueryFeatures {
    std::vector<int> content_index;
    Matrix real;
};

/// Per-position outcome encodings, known only after the answer:
/// explanation (no/yes/absent) | correctness (incorrect/correct/absent) |
/// elapsed_std | user_answer (0..3/absent). Absent categories cover lectures
/// and missing data.
constexpr int kMemoryFeatureWidth = 12;

/// Running per-user aggregates. Features read committed counters only; the
/// pending buffer holds the currently open container and never contributes.
struct UserAggregateState {
    std::int64_t answered_total = 0;
    std::int64_t answered_correct = 0;
    std::unordered_map<std::int64_t, std::pair<std::int64_t, std::int64_t>> content_stats;
    std::array<std::int64_t, 8> part_attempts{};  // index 1..7
    std::array<std::int64_t, 8> part_corrects{};
    std::vector<std::int64_t> tag_attempts;
    std::vector<std::int64_t> tag_corrects;
    std::array<std::int64_t, 8> lecture_part{};
    std::array<std::int64_t, 4> lecture_type{};
    std::vector<std::int64_t> lecture_tag;
    std::int64_t expl_seen_after_correct = 0;
    std::int64_t expl_seen_after_incorrect = 0;
    std::int64_t expl_seen_total = 0;
    std::int64_t elapsed_sum_ms = 0;
    std::int64_t elapsed_count = 0;
    std::array<std::int64_t, 4> user_answer_counts{};
    std::vector<InteractionEvent> pending;

    explicit UserAggregateState(int n_tags)
        : tag_attempts(n_tags, 0), tag_corrects(n_tags, 0), lecture_tag(n_tags, 0) {}
};

/// Mean and population standard deviation (ddof = 0) of the three
/// standardized features over every position where the raw value is defined.
/// time_delta of a user's first event is 0; log_timestamp is log(1 + ts).
StandardizationStats fit_standardization(const Histories& histories);
StandardizationStats fit_standardization(std::span<const UserHistory* const> histories);

int query_feature_width(const FeatureConfig& config);
std::vector<std::string> query_feature_layout(const FeatureConfig& config);

/// window_offset = number of left-pad slots preceding events[0] in its
/// window, so position_norm = (window_offset + i + 1) / seq_len. prev is the
/// event immediately before the window in the full history (nullptr at the
/// start of a history); deltas fall back to 0 without it.
QueryFeatures compute_query_features(std::span<const InteractionEvent> events,
                                     const InteractionEvent* prev, const ContentCatalog& catalog,
                                     const FeatureConfig& config, int window_offset = 0);

Matrix compute_memory_features(std::span<const InteractionEvent> events,
                               const FeatureConfig& config);

/// Append an event to the open container. Errors if it belongs to a
/// different container than the buffered ones.
void buffer_event(UserAggregateState& state, const InteractionEvent& event);

/// Fold the pending container into the committed counters and clear it.
void commit_container(UserAggregateState& state, const ContentCatalog& catalog);

int handcrafted_width(const FeatureConfig& config);
std::vector<std::string> handcrafted_layout(const FeatureConfig& config);

/// Hand-crafted vector for one event from committed counters only.
std::vector<double> snapshot_handcrafted(const UserAggregateState& state,
                                         const InteractionEvent& event,
                                         const ContentCatalog& catalog,
                                         const FeatureConfig& config);

/// Hand-crafted matrix for a whole history: commits on every run boundary,
/// snapshots before buffering, so row i depends only on strictly earlier
/// container runs.
Matrix stream_user(const UserHistory& history, const ContentCatalog& catalog,
                   const FeatureConfig& config);

double standardize(double raw, const StandardStats& stats);

}  // namespace kt
