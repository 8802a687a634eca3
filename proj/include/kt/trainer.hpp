#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kt/events.hpp"
#include "kt/features.hpp"
#include "kt/model.hpp"

namespace kt {

/// One training/evaluation window over a user's history: len real events
/// starting at event index start, left-padded with offset = L - len slots.
/// flagged marks windows touched by a container run longer than L (or forced
/// to start mid-run by one), where the no-mid-run-start guarantee cannot
/// hold.
struct Window {
    std::int64_t user_id = 0;
    int start = 0;
    int len = 0;
    int offset = 0;
    bool flagged = false;
};

/// Sliding windows covering every event. Histories up to L events get a
/// single left-padded window. Longer ones get overlapping windows: each next
/// start advances by stride, is clamped so the final window ends at the last
/// event, and snaps back to the start of the container run it lands in.
std::vector<Window> make_windows(const UserHistory& history, int L, int stride);

struct TrainConfig {
    int batch_size = 32;
    int epochs_phase1 = 35;
    double lr1 = 2e-3;
    int epochs_phase2 = 1;
    double lr2 = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 1;
    double val_fraction = 0.2;  // by user
    int stride = 0;             // 0 -> L
    double grad_clip = 0.0;     // global-norm clip; 0 disables
    /// When false, wall_seconds is written as 0.0 so two identical runs
    /// produce byte-identical metrics.
    bool record_timings = true;
    std::string checkpoint_path;  // empty -> no file, best params returned only
    std::string metrics_path;     // empty -> no JSONL file
    std::string manifest_hash;    // embedded in metrics records and checkpoint

    void validate() const;
};

/// Scaled-down presets that train in minutes on a laptop CPU.
TrainConfig desk_train_config();
ModelConfig desk_model_config();

struct AdamState {
    std::map<std::string, std::vector<double>> m;
    std::map<std::string, std::vector<double>> v;
    std::int64_t t = 0;
};

using GradMap = std::map<std::string, std::vector<double>>;

/// Standard bias-corrected Adam update, one step over every entry of grads.
/// Errors on a non-finite gradient, naming the tensor.
void adam_step(ModelParams& params, const GradMap& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps);

/// Mann-Whitney rank AUC with average ranks for ties. Errors unless both
/// classes are present.
double roc_auc(std::span<const int> labels, std::span<const double> scores);

/// O(n^2) pair-counting oracle for roc_auc (ties count 1/2).
double roc_auc_pairwise(std::span<const int> labels, std::span<const double> scores);

/// Deterministic user-level split: (train_users, val_users), both sorted and
/// non-empty, disjoint by construction.
std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>> split_users(
    const Histories& histories, double val_fraction, std::uint64_t seed);

struct WindowRef {
    const UserHistory* history = nullptr;
    Window window;
};

/// Features, plan, labels and masks for a batch of windows, flattened to
/// (batch * seq_len) rows.
ModelBatch assemble_batch(std::span<const WindowRef> items, const ContentCatalog& catalog,
                          const FeatureConfig& feature_config, const ModelConfig& model_config);

struct EpochMetrics {
    int epoch = 0;
    int phase = 1;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_auc = 0.0;
    double wall_seconds = 0.0;
};

std::string metrics_record_json(const EpochMetrics& metrics, const std::string& manifest_hash);

struct EvalPrediction {
    std::int64_t user_id = 0;
    std::int64_t row_id = 0;
    double score = 0.0;
    int label = 0;
};

struct EvalResult {
    double auc = 0.0;
    std::vector<EvalPrediction> predictions;  // one per question event, row_id order per user
};

/// Deduped predictions over the given users: where windows overlap, each
/// position keeps the window in which it sits latest, i.e. with the most
/// in-window history. Forward passes run in parallel (capped by KT_THREADS);
/// results do not depend on the worker count.
EvalResult evaluate(const ModelParams& params, const ModelConfig& model_config,
                    const Histories& histories, const ContentCatalog& catalog,
                    const FeatureConfig& feature_config, std::span<const std::int64_t> users,
                    int stride, int batch_size);

struct TrainResult {
    std::vector<EpochMetrics> metrics;
    ModelParams best_params;
    double best_auc = 0.0;
    int best_epoch = 0;
    ModelConfig model_config;      // with widths bound
    FeatureConfig feature_config;  // with fitted stats
    std::vector<std::int64_t> train_users;
    std::vector<std::int64_t> val_users;
};

/// Two-phase Adam training with per-epoch validation AUC and best-AUC
/// checkpointing. Deterministic for a fixed seed: batch gradients are
/// reduced in a fixed item order no matter how many workers run.
TrainResult train(const Histories& histories, const ContentCatalog& catalog,
                  ModelConfig model_config, const TrainConfig& train_config);

/// AUC on val users' question events when each is scored by its question's
/// mean correct rate over train users (global mean for unseen questions).
double question_mean_baseline_auc(const Histories& histories,
                                  std::span<const std::int64_t> train_users,
                                  std::span<const std::int64_t> val_users);

/// AUC on val users' question events scored by the generator's true
/// P(correct): the dataset's ceiling.
double truth_ceiling_auc(const Histories& histories,
                         const std::unordered_map<std::int64_t, double>& truth,
                         std::span<const std::int64_t> val_users);

/// min(cap, KT_THREADS if set, hardware concurrency), at least 1.
int worker_count(int cap);

}  // namespace kt
