#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "kt/events.hpp"

namespace kt {

/// Deterministic IRT-style student simulator. Students answer questions
/// grouped into containers; P(correct) depends on user ability, question
/// difficulty/discrimination, and a practice effect that grows with the
/// number of questions already attempted in the same part. That last term
/// gives recurrent models and the running-aggregate features real signal.
struct SynthConfig {
    int n_users = 100;
    int n_questions = 200;
    int n_lectures = 10;
    int n_tags = 20;
    int n_events_min = 20;
    int n_events_max = 60;
    std::vector<double> container_size_weights = {0.55, 0.20, 0.12, 0.08, 0.05};  // sizes 1..5
    double lecture_prob = 0.02;
    double gamma = 0.3;             // practice gain per log-attempt in part
    double elapsed_log_mean = 9.9;  // ln of elapsed ms; exp(9.9) ~ 20 s median
    double elapsed_log_sd = 0.5;
    double explanation_prob = 0.8;
    std::uint64_t seed = 1;

    void validate() const;
};

struct SynthResult {
    Histories histories;
    ContentCatalog catalog;
    /// row_id -> true P(correct); question rows only.
    std::unordered_map<std::int64_t, double> truth;
    std::vector<double> theta;  // per-user ability, index = user_id
};

/// Identical config -> identical result, independent of platform. Every
/// generated history passes validate_history.
SynthResult generate(const SynthConfig& config);

/// CSV "row_id,p_correct", rows sorted by row_id, probabilities printed with
/// 17 significant digits so parsing them back is lossless.
void write_truth_csv(std::ostream& out, const SynthResult& result);
std::unordered_map<std::int64_t, double> parse_truth_csv(std::istream& in);

/// Write events.csv, questions.csv, lectures.csv, truth.csv under dir.
void write_synth_files(const std::string& dir, const SynthResult& result);

}  // namespace kt
