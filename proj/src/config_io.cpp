#include "kt/config_io.hpp"

#include <stdexcept>

namespace kt {

using nlohmann::json;

void to_json(json& j, const StandardStats& s) {
    j = json{{"mean", s.mean}, {"std", s.std}};
}

void from_json(const json& j, StandardStats& s) {
    j.at("mean").get_to(s.mean);
    j.at("std").get_to(s.std);
}

void to_json(json& j, const StandardizationStats& s) {
    j = json{{"time_delta", s.time_delta},
             {"log_timestamp", s.log_timestamp},
             {"elapsed_time", s.elapsed_time}};
}

void from_json(const json& j, StandardizationStats& s) {
    j.at("time_delta").get_to(s.time_delta);
    j.at("log_timestamp").get_to(s.log_timestamp);
    j.at("elapsed_time").get_to(s.elapsed_time);
}

namespace {

std::string transform_name(CountTransform t) {
    return t == CountTransform::Raw ? "raw" : "log1p";
}

CountTransform transform_from(const std::string& s) {
    if (s == "raw") return CountTransform::Raw;
    if (s == "log1p") return CountTransform::Log1p;
    throw std::invalid_argument("unknown count_transform '" + s + "'");
}

std::string scope_name(TagScope t) {
    return t == TagScope::CurrentQuestion ? "current_question" : "all_tags";
}

TagScope scope_from(const std::string& s) {
    if (s == "current_question") return TagScope::CurrentQuestion;
    if (s == "all_tags") return TagScope::AllTags;
    throw std::invalid_argument("unknown tag_scope '" + s + "'");
}

}  // namespace

void to_json(json& j, const FeatureConfig& c) {
    j = json{{"n_questions", c.n_questions},
             {"n_lectures", c.n_lectures},
             {"n_tags", c.n_tags},
             {"seq_len", c.seq_len},
             {"n_parts", c.n_parts},
             {"n_answers", c.n_answers},
             {"container_delta_divisor", c.container_delta_divisor},
             {"stats", c.stats},
             {"ratio_default", c.ratio_default},
             {"count_transform", transform_name(c.count_transform)},
             {"tag_scope", scope_name(c.tag_scope)}};
}

void from_json(const json& j, FeatureConfig& c) {
    j.at("n_questions").get_to(c.n_questions);
    j.at("n_lectures").get_to(c.n_lectures);
    j.at("n_tags").get_to(c.n_tags);
    j.at("seq_len").get_to(c.seq_len);
    // n_parts and n_answers are compile-time constants; reject configs that
    // claim different values rather than silently reinterpreting them.
    if (j.at("n_parts").get<int>() != FeatureConfig::n_parts)
        throw std::invalid_argument("feature config declares n_parts != " +
                                    std::to_string(FeatureConfig::n_parts));
    if (j.at("n_answers").get<int>() != FeatureConfig::n_answers)
        throw std::invalid_argument("feature config declares n_answers != " +
                                    std::to_string(FeatureConfig::n_answers));
    j.at("container_delta_divisor").get_to(c.container_delta_divisor);
    j.at("stats").get_to(c.stats);
    j.at("ratio_default").get_to(c.ratio_default);
    c.count_transform = transform_from(j.at("count_transform").get<std::string>());
    c.tag_scope = scope_from(j.at("tag_scope").get<std::string>());
}

void to_json(json& j, const ModelConfig& c) {
    j = json{{"d_model", c.d_model},
             {"n_heads", c.n_heads},
             {"seq_len", c.seq_len},
             {"dropout_rate", c.dropout_rate},
             {"embed_dim", c.embed_dim},
             {"mlp_hidden", c.mlp_hidden},
             {"mask_window", c.mask_window},
             {"query_width", c.query_width},
             {"memory_width", c.memory_width},
             {"hand_width", c.hand_width},
             {"n_content", c.n_content},
             {"init_seed", c.init_seed}};
}

void from_json(const json& j, ModelConfig& c) {
    j.at("d_model").get_to(c.d_model);
    j.at("n_heads").get_to(c.n_heads);
    j.at("seq_len").get_to(c.seq_len);
    j.at("dropout_rate").get_to(c.dropout_rate);
    j.at("embed_dim").get_to(c.embed_dim);
    j.at("mlp_hidden").get_to(c.mlp_hidden);
    j.at("mask_window").get_to(c.mask_window);
    j.at("query_width").get_to(c.query_width);
    j.at("memory_width").get_to(c.memory_width);
    j.at("hand_width").get_to(c.hand_width);
    j.at("n_content").get_to(c.n_content);
    j.at("init_seed").get_to(c.init_seed);
}

void to_json(json& j, const SynthConfig& c) {
    j = json{{"n_users", c.n_users},
             {"n_questions", c.n_questions},
             {"n_lectures", c.n_lectures},
             {"n_tags", c.n_tags},
             {"n_events_min", c.n_events_min},
             {"n_events_max", c.n_events_max},
             {"container_size_weights", c.container_size_weights},
             {"lecture_prob", c.lecture_prob},
             {"gamma", c.gamma},
             {"elapsed_log_mean", c.elapsed_log_mean},
             {"elapsed_log_sd", c.elapsed_log_sd},
             {"explanation_prob", c.explanation_prob},
             {"seed", c.seed}};
}

void from_json(const json& j, SynthConfig& c) {
    j.at("n_users").get_to(c.n_users);
    j.at("n_questions").get_to(c.n_questions);
    j.at("n_lectures").get_to(c.n_lectures);
    j.at("n_tags").get_to(c.n_tags);
    j.at("n_events_min").get_to(c.n_events_min);
    j.at("n_events_max").get_to(c.n_events_max);
    j.at("container_size_weights").get_to(c.container_size_weights);
    j.at("lecture_prob").get_to(c.lecture_prob);
    j.at("gamma").get_to(c.gamma);
    j.at("elapsed_log_mean").get_to(c.elapsed_log_mean);
    j.at("elapsed_log_sd").get_to(c.elapsed_log_sd);
    j.at("explanation_prob").get_to(c.explanation_prob);
    j.at("seed").get_to(c.seed);
}

void to_json(json& j, const TrainConfig& c) {
    j = json{{"batch_size", c.batch_size},
             {"epochs_phase1", c.epochs_phase1},
             {"lr1", c.lr1},
             {"epochs_phase2", c.epochs_phase2},
             {"lr2", c.lr2},
             {"beta1", c.beta1},
             {"beta2", c.beta2},
             {"eps", c.eps},
             {"seed", c.seed},
             {"val_fraction", c.val_fraction},
             {"stride", c.stride},
             {"grad_clip", c.grad_clip},
             {"record_timings", c.record_timings}};
}

void from_json(const json& j, TrainConfig& c) {
    j.at("batch_size").get_to(c.batch_size);
    j.at("epochs_phase1").get_to(c.epochs_phase1);
    j.at("lr1").get_to(c.lr1);
    j.at("epochs_phase2").get_to(c.epochs_phase2);
    j.at("lr2").get_to(c.lr2);
    j.at("beta1").get_to(c.beta1);
    j.at("beta2").get_to(c.beta2);
    j.at("eps").get_to(c.eps);
    j.at("seed").get_to(c.seed);
    j.at("val_fraction").get_to(c.val_fraction);
    j.at("stride").get_to(c.stride);
    j.at("grad_clip").get_to(c.grad_clip);
    j.at("record_timings").get_to(c.record_timings);
}

}  // namespace kt
