#include "kt/features.hpp"

#include <cmath>
#include <stdexcept>

namespace kt {

namespace {

void accumulate(std::span<const double> values, const char* name, StandardStats& out) {
    if (values.size() < 2) {
        throw std::invalid_argument(std::string("fit_standardization: feature '") + name +
                                    "' needs at least 2 observations, got " +
                                    std::to_string(values.size()));
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    const double var = sq / static_cast<double>(values.size());
    if (var <= 0.0) {
        throw std::invalid_argument(std::string("fit_standardization: feature '") + name +
                                    "' has zero variance");
    }
    out.mean = mean;
    out.std = std::sqrt(var);
}

double transform_count(std::int64_t count, const FeatureConfig& config) {
    const double c = static_cast<double>(count);
    return config.count_transform == CountTransform::Log1p ? std::log1p(c) : c;
}

double ratio(std::int64_t num, std::int64_t den, const FeatureConfig& config) {
    return den > 0 ? static_cast<double>(num) / static_cast<double>(den) : config.ratio_default;
}

// Tag set relevant to an event: a question's tags, or the lecture's single tag.
std::vector<int> event_tags(const InteractionEvent& e, const ContentCatalog& catalog) {
    if (e.is_question()) return catalog.question(e.content_id).tags;
    return {catalog.lecture(e.content_id).tag};
}

}  // namespace

double standardize(double raw, const StandardStats& stats) {
    if (stats.std <= 0.0) throw std::invalid_argument("standardize: std must be positive");
    return (raw - stats.mean) / stats.std;
}

StandardizationStats fit_standardization(std::span<const UserHistory* const> histories) {
    std::vector<double> deltas;
    std::vector<double> log_ts;
    std::vector<double> elapsed;
    for (const UserHistory* hist : histories) {
        for (std::size_t i = 0; i < hist->events.size(); ++i) {
            const InteractionEvent& e = hist->events[i];
            const double delta =
                i == 0 ? 0.0
                       : static_cast<double>(e.timestamp_ms - hist->events[i - 1].timestamp_ms);
            deltas.push_back(delta);
            log_ts.push_back(std::log1p(static_cast<double>(e.timestamp_ms)));
            if (e.elapsed_time_ms) elapsed.push_back(static_cast<double>(*e.elapsed_time_ms));
        }
    }
    StandardizationStats stats;
    accumulate(deltas, "time_delta", stats.time_delta);
    accumulate(log_ts, "log_timestamp", stats.log_timestamp);
    accumulate(elapsed, "elapsed_time", stats.elapsed_time);
    return stats;
}

StandardizationStats fit_standardization(const Histories& histories) {
    std::vector<const UserHistory*> refs;
    refs.reserve(histories.size());
    for (const auto& [uid, hist] : histories) refs.push_back(&hist);
    return fit_standardization(std::span<const UserHistory* const>(refs));
}

int query_feature_width(const FeatureConfig& config) {
    return FeatureConfig::n_parts + config.n_tags + FeatureConfig::n_answers + 5;
}

std::vector<std::string> query_feature_layout(const FeatureConfig& config) {
    std::vector<std::string> names;
    for (int p = 1; p <= FeatureConfig::n_parts; ++p) names.push_back("part" + std::to_string(p));
    for (int t = 0; t < config.n_tags; ++t) names.push_back("tag" + std::to_string(t));
    for (int a = 0; a < FeatureConfig::n_answers; ++a) {
        names.push_back("correct_answer" + std::to_string(a));
    }
    names.push_back("time_delta_std");
    names.push_back("log_timestamp_std");
    names.push_back("container_delta_scaled");
    names.push_back("content_type_delta");
    names.push_back("position_norm");
    return names;
}

QueryFeatures compute_query_features(std::span<const InteractionEvent> events,
                                     const InteractionEvent* prev, const ContentCatalog& catalog,
                                     const FeatureConfig& config, int window_offset) {
    const int n = static_cast<int>(events.size());
    if (n + window_offset > config.seq_len) {
        throw std::invalid_argument("compute_query_features: window of " + std::to_string(n) +
                                    " events at offset " + std::to_string(window_offset) +
                                    " exceeds seq_len " + std::to_string(config.seq_len));
    }
    const int width = query_feature_width(config);
    QueryFeatures out;
    out.content_index.resize(n);
    out.real = Matrix(n, width);
    const int tag_off = FeatureConfig::n_parts;
    const int ans_off = tag_off + config.n_tags;
    const int scalar_off = ans_off + FeatureConfig::n_answers;

    for (int i = 0; i < n; ++i) {
        const InteractionEvent& e = events[i];
        const int embed = catalog.embedding_index(e);
        if (embed < 0) {
            throw std::out_of_range("compute_query_features: content_id " +
                                    std::to_string(e.content_id) + " not in metadata");
        }
        out.content_index[i] = embed;
        double* row = out.real.row(i);
        if (e.is_question()) {
            const QuestionMeta& q = catalog.question(e.content_id);
            row[q.part - 1] = 1.0;
            for (int t : q.tags) {
                if (t >= 0 && t < config.n_tags) row[tag_off + t] = 1.0;
            }
            row[ans_off + q.correct_answer] = 1.0;
        }
        const InteractionEvent* before = i > 0 ? &events[i - 1] : prev;
        const double delta =
            before ? static_cast<double>(e.timestamp_ms - before->timestamp_ms) : 0.0;
        row[scalar_off + 0] = standardize(delta, config.stats.time_delta);
        row[scalar_off + 1] = standardize(std::log1p(static_cast<double>(e.timestamp_ms)),
                                          config.stats.log_timestamp);
        const double cdelta =
            before ? static_cast<double>(e.task_container_id - before->task_container_id) : 0.0;
        row[scalar_off + 2] = cdelta / config.container_delta_divisor;
        const int code = e.is_question() ? 0 : 1;
        const int prev_code = before ? (before->is_question() ? 0 : 1) : code;
        row[scalar_off + 3] = static_cast<double>(code - prev_code);
        row[scalar_off + 4] =
            static_cast<double>(window_offset + i + 1) / static_cast<double>(config.seq_len);
    }
    return out;
}

Matrix compute_memory_features(std::span<const InteractionEvent> events,
                               const FeatureConfig& config) {
    const int n = static_cast<int>(events.size());
    Matrix out(n, kMemoryFeatureWidth);
    for (int i = 0; i < n; ++i) {
        const InteractionEvent& e = events[i];
        double* row = out.row(i);
        // explanation: [no, yes, absent]
        if (e.had_explanation) {
            row[*e.had_explanation ? 1 : 0] = 1.0;
        } else {
            row[2] = 1.0;
        }
        // correctness: [incorrect, correct, absent]
        if (e.answered_correctly) {
            row[3 + (*e.answered_correctly ? 1 : 0)] = 1.0;
        } else {
            row[5] = 1.0;
        }
        row[6] = e.elapsed_time_ms
                     ? standardize(static_cast<double>(*e.elapsed_time_ms), config.stats.elapsed_time)
                     : 0.0;
        // user answer: [0..3, absent]
        if (e.user_answer) {
            row[7 + *e.user_answer] = 1.0;
        } else {
            row[11] = 1.0;
        }
    }
    return out;
}

void buffer_event(UserAggregateState& state, const InteractionEvent& event) {
    if (!state.pending.empty() &&
        state.pending.front().task_container_id != event.task_container_id) {
        throw std::invalid_argument(
            "buffer_event: container " + std::to_string(event.task_container_id) +
            " differs from open container " +
            std::to_string(state.pending.front().task_container_id));
    }
    state.pending.push_back(event);
}

void commit_container(UserAggregateState& state, const ContentCatalog& catalog) {
    for (const InteractionEvent& e : state.pending) {
        if (e.task_container_id != state.pending.front().task_container_id) {
            throw std::invalid_argument("commit_container: mixed container ids in buffer");
        }
    }
    for (const InteractionEvent& e : state.pending) {
        if (e.is_question()) {
            const QuestionMeta& q = catalog.question(e.content_id);
            const bool correct = e.answered_correctly.value_or(false);
            state.answered_total += 1;
            state.answered_correct += correct ? 1 : 0;
            auto& cs = state.content_stats[e.content_id];
            cs.first += 1;
            cs.second += correct ? 1 : 0;
            state.part_attempts[q.part] += 1;
            state.part_corrects[q.part] += correct ? 1 : 0;
            for (int t : q.tags) {
                if (t >= 0 && t < static_cast<int>(state.tag_attempts.size())) {
                    state.tag_attempts[t] += 1;
                    state.tag_corrects[t] += correct ? 1 : 0;
                }
            }
            if (e.had_explanation.value_or(false)) {
                state.expl_seen_total += 1;
                if (correct) {
                    state.expl_seen_after_correct += 1;
                } else {
                    state.expl_seen_after_incorrect += 1;
                }
            }
            if (e.elapsed_time_ms) {
                state.elapsed_sum_ms += *e.elapsed_time_ms;
                state.elapsed_count += 1;
            }
            if (e.user_answer && *e.user_answer >= 0 && *e.user_answer < 4) {
                state.user_answer_counts[*e.user_answer] += 1;
            }
        } else {
            const LectureMeta& l = catalog.lecture(e.content_id);
            state.lecture_part[l.part] += 1;
            state.lecture_type[static_cast<int>(l.type_of)] += 1;
            if (l.tag >= 0 && l.tag < static_cast<int>(state.lecture_tag.size())) {
                state.lecture_tag[l.tag] += 1;
            }
        }
    }
    state.pending.clear();
}

int handcrafted_width(const FeatureConfig& config) {
    const int tag_block = config.tag_scope == TagScope::CurrentQuestion ? 2 : 2 * config.n_tags;
    const int lecture_tag_block = config.tag_scope == TagScope::CurrentQuestion ? 1 : config.n_tags;
    return 2 + 2 + 2 * FeatureConfig::n_parts + tag_block + (FeatureConfig::n_parts + 4) +
           lecture_tag_block + 3 + 1 + FeatureConfig::n_answers;
}

std::vector<std::string> handcrafted_layout(const FeatureConfig& config) {
    std::vector<std::string> names;
    names.push_back("overall_correct_ratio");
    names.push_back("overall_answered_count");
    names.push_back("content_correct_ratio");
    names.push_back("content_attempt_count");
    for (int p = 1; p <= FeatureConfig::n_parts; ++p) {
        names.push_back("part" + std::to_string(p) + "_correct_ratio");
    }
    for (int p = 1; p <= FeatureConfig::n_parts; ++p) {
        names.push_back("part" + std::to_string(p) + "_attempt_count");
    }
    if (config.tag_scope == TagScope::CurrentQuestion) {
        names.push_back("tags_correct_ratio");
        names.push_back("tags_attempt_count");
    } else {
        for (int t = 0; t < config.n_tags; ++t) {
            names.push_back("tag" + std::to_string(t) + "_correct_ratio");
        }
        for (int t = 0; t < config.n_tags; ++t) {
            names.push_back("tag" + std::to_string(t) + "_attempt_count");
        }
    }
    for (int p = 1; p <= FeatureConfig::n_parts; ++p) {
        names.push_back("lecture_count_part" + std::to_string(p));
    }
    for (const char* t : {"concept", "solving_question", "intention", "starter"}) {
        names.push_back(std::string("lecture_count_") + t);
    }
    if (config.tag_scope == TagScope::CurrentQuestion) {
        names.push_back("lecture_count_tags");
    } else {
        for (int t = 0; t < config.n_tags; ++t) {
            names.push_back("lecture_count_tag" + std::to_string(t));
        }
    }
    names.push_back("explanation_ratio_after_correct");
    names.push_back("explanation_ratio_after_incorrect");
    names.push_back("explanation_count");
    names.push_back("mean_elapsed_std");
    for (int a = 0; a < FeatureConfig::n_answers; ++a) {
        names.push_back("user_answer_ratio" + std::to_string(a));
    }
    return names;
}

std::vector<double> snapshot_handcrafted(const UserAggregateState& state,
                                         const InteractionEvent& event,
                                         const ContentCatalog& catalog,
                                         const FeatureConfig& config) {
    std::vector<double> out;
    out.reserve(handcrafted_width(config));

    out.push_back(ratio(state.answered_correct, state.answered_total, config));
    out.push_back(transform_count(state.answered_total, config));

    std::int64_t content_attempts = 0;
    std::int64_t content_corrects = 0;
    if (event.is_question()) {
        auto it = state.content_stats.find(event.content_id);
        if (it != state.content_stats.end()) {
            content_attempts = it->second.first;
            content_corrects = it->second.second;
        }
    }
    out.push_back(ratio(content_corrects, content_attempts, config));
    out.push_back(transform_count(content_attempts, config));

    for (int p = 1; p <= FeatureConfig::n_parts; ++p) {
        out.push_back(ratio(state.part_corrects[p], state.part_attempts[p], config));
    }
    for (int p = 1; p <= FeatureConfig::n_parts; ++p) {
        out.push_back(transform_count(state.part_attempts[p], config));
    }

    const std::vector<int> tags = event_tags(event, catalog);
    if (config.tag_scope == TagScope::CurrentQuestion) {
        std::int64_t att = 0;
        std::int64_t cor = 0;
        for (int t : tags) {
            if (t >= 0 && t < config.n_tags) {
                att += state.tag_attempts[t];
                cor += state.tag_corrects[t];
            }
        }
        out.push_back(ratio(cor, att, config));
        out.push_back(transform_count(att, config));
    } else {
        for (int t = 0; t < config.n_tags; ++t) {
            out.push_back(ratio(state.tag_corrects[t], state.tag_attempts[t], config));
        }
        for (int t = 0; t < config.n_tags; ++t) {
            out.push_back(transform_count(state.tag_attempts[t], config));
        }
    }

    for (int p = 1; p <= FeatureConfig::n_parts; ++p) {
        out.push_back(transform_count(state.lecture_part[p], config));
    }
    for (int t = 0; t < 4; ++t) out.push_back(transform_count(state.lecture_type[t], config));
    if (config.tag_scope == TagScope::CurrentQuestion) {
        std::int64_t count = 0;
        for (int t : tags) {
            if (t >= 0 && t < config.n_tags) count += state.lecture_tag[t];
        }
        out.push_back(transform_count(count, config));
    } else {
        for (int t = 0; t < config.n_tags; ++t) {
            out.push_back(transform_count(state.lecture_tag[t], config));
        }
    }

    out.push_back(ratio(state.expl_seen_after_correct, state.answered_correct, config));
    out.push_back(
        ratio(state.expl_seen_after_incorrect, state.answered_total - state.answered_correct, config));
    out.push_back(transform_count(state.expl_seen_total, config));

    out.push_back(state.elapsed_count > 0
                      ? standardize(static_cast<double>(state.elapsed_sum_ms) /
                                        static_cast<double>(state.elapsed_count),
                                    config.stats.elapsed_time)
                      : 0.0);

    for (int a = 0; a < FeatureConfig::n_answers; ++a) {
        out.push_back(ratio(state.user_answer_counts[a], state.answered_total, config));
    }
    return out;
}

Matrix stream_user(const UserHistory& history, const ContentCatalog& catalog,
                   const FeatureConfig& config) {
    const int n = static_cast<int>(history.events.size());
    const int width = handcrafted_width(config);
    Matrix out(n, width);
    UserAggregateState state(config.n_tags);
    for (int i = 0; i < n; ++i) {
        const InteractionEvent& e = history.events[i];
        const bool new_run =
            i > 0 && e.task_container_id != history.events[i - 1].task_container_id;
        if (new_run) commit_container(state, catalog);
        const std::vector<double> row = snapshot_handcrafted(state, e, catalog, config);
        std::copy(row.begin(), row.end(), out.row(i));
        buffer_event(state, e);
    }
    return out;
}

}  // namespace kt
