#include "kt/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "kt/plan.hpp"
#include "kt/rng.hpp"

namespace kt {

namespace {

constexpr std::uint64_t kSplitStream = 0x53504c49;    // "SPLI"
constexpr std::uint64_t kInitStream = 0x494e4954;     // "INIT"
constexpr std::uint64_t kShuffleStream = 0x53485546;  // "SHUF"
constexpr std::uint64_t kDropStream = 0x44524f50;     // "DROP"

void run_workers(int n_workers, const std::function<void(int)>& body) {
    if (n_workers <= 1) {
        body(0);
        return;
    }
    std::vector<std::exception_ptr> errors(n_workers);
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                body(w);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void check_scores_finite(std::span<const double> scores) {
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("roc_auc: non-finite score");
}

struct ClassCounts {
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
};

ClassCounts count_classes(std::span<const int> labels, std::span<const double> scores) {
    if (labels.size() != scores.size())
        throw std::invalid_argument("roc_auc: labels and scores differ in length");
    ClassCounts c;
    for (int y : labels) {
        if (y != 0 && y != 1) throw std::invalid_argument("roc_auc: labels must be 0 or 1");
        if (y == 1)
            ++c.n_pos;
        else
            ++c.n_neg;
    }
    if (c.n_pos == 0 || c.n_neg == 0)
        throw std::invalid_argument("roc_auc: need at least one positive and one negative label");
    return c;
}

}  // namespace

std::vector<Window> make_windows(const UserHistory& history, int L, int stride) {
    if (L < 1) throw std::invalid_argument("make_windows: L must be at least 1");
    if (stride < 1) throw std::invalid_argument("make_windows: stride must be at least 1");
    const int n = static_cast<int>(history.events.size());
    std::vector<Window> out;
    if (n == 0) return out;

    std::vector<std::int64_t> containers(n);
    for (int i = 0; i < n; ++i) containers[i] = history.events[i].task_container_id;
    const std::vector<int> starts = container_starts(containers);
    std::vector<int> run_end(n);
    for (int i = n - 1; i >= 0; --i)
        run_end[i] = (i + 1 < n && starts[i + 1] == starts[i]) ? run_end[i + 1] : i;

    // Only the runs crossing a window edge can exceed L; interior runs fit by
    // construction.
    auto flagged_at = [&](int s, int len) {
        const int last = s + len - 1;
        const bool long_run = run_end[s] - starts[s] + 1 > L || run_end[last] - starts[last] + 1 > L;
        return starts[s] != s || long_run;
    };

    if (n <= L) {
        out.push_back({history.user_id, 0, n, L - n, flagged_at(0, n)});
        return out;
    }
    int s = 0;
    while (true) {
        const int len = std::min(L, n - s);
        out.push_back({history.user_id, s, len, L - len, flagged_at(s, len)});
        if (s + len >= n) break;
        // Advance by stride, clamp so the last window ends on the last event,
        // then snap back to the run start; if the run began at or before the
        // current start (a run longer than the stride), advance mid-run.
        const int nominal = std::min(s + stride, n - L);
        const int snapped = starts[nominal];
        s = snapped > s ? snapped : nominal;
    }
    return out;
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
    if (epochs_phase1 < 0 || epochs_phase2 < 0 || epochs_phase1 + epochs_phase2 < 1)
        throw std::invalid_argument("need at least one epoch across both phases");
    if (lr1 <= 0.0 || lr2 <= 0.0) throw std::invalid_argument("learning rates must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw std::invalid_argument("Adam betas must lie in [0, 1)");
    if (eps <= 0.0) throw std::invalid_argument("Adam epsilon must be positive");
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw std::invalid_argument("val_fraction must lie in (0, 1)");
    if (stride < 0) throw std::invalid_argument("stride must be non-negative");
    if (grad_clip < 0.0) throw std::invalid_argument("grad_clip must be non-negative");
}

TrainConfig desk_train_config() {
    TrainConfig c;
    c.epochs_phase1 = 5;
    c.epochs_phase2 = 1;
    return c;
}

ModelConfig desk_model_config() {
    ModelConfig c;
    c.d_model = 64;
    c.n_heads = 2;
    c.seq_len = 64;
    c.embed_dim = 64;
    return c;
}

void adam_step(ModelParams& params, const GradMap& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
    ++state.t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (const auto& [name, g] : grads) {
        Tensor& t = *params.at(name);
        if (g.size() != t.data.size())
            throw std::invalid_argument("adam_step: gradient size mismatch for tensor '" + name +
                                        "'");
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.size() != g.size()) m.assign(g.size(), 0.0);
        if (v.size() != g.size()) v.assign(g.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!std::isfinite(g[i]))
                throw std::runtime_error("adam_step: non-finite gradient in tensor '" + name + "'");
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            t.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

double roc_auc(std::span<const int> labels, std::span<const double> scores) {
    const ClassCounts c = count_classes(labels, scores);
    check_scores_finite(scores);
    const std::size_t n = labels.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = static_cast<double>(i + 1 + j) / 2.0;  // ranks i+1 .. j
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
        i = j;
    }
    const double n_pos = static_cast<double>(c.n_pos);
    const double u = pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    return u / (n_pos * static_cast<double>(c.n_neg));
}

double roc_auc_pairwise(std::span<const int> labels, std::span<const double> scores) {
    const ClassCounts c = count_classes(labels, scores);
    check_scores_finite(scores);
    double wins = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j] != 0) continue;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    return wins / (static_cast<double>(c.n_pos) * static_cast<double>(c.n_neg));
}

std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>> split_users(
    const Histories& histories, double val_fraction, std::uint64_t seed) {
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw std::invalid_argument("val_fraction must lie in (0, 1)");
    std::vector<std::int64_t> ids;
    ids.reserve(histories.size());
    for (const auto& [uid, hist] : histories) ids.push_back(uid);
    if (ids.size() < 2) throw std::invalid_argument("need at least 2 users to split");
    rng::Stream stream(rng::mix(seed, kSplitStream));
    for (std::size_t i = ids.size(); i > 1; --i)
        std::swap(ids[i - 1], ids[static_cast<std::size_t>(stream.uniform_int(
                                  static_cast<std::int64_t>(i)))]);
    const auto n = static_cast<std::int64_t>(ids.size());
    std::int64_t n_val = std::llround(val_fraction * static_cast<double>(n));
    n_val = std::clamp<std::int64_t>(n_val, 1, n - 1);
    std::vector<std::int64_t> val(ids.begin(), ids.begin() + n_val);
    std::vector<std::int64_t> train(ids.begin() + n_val, ids.end());
    std::sort(val.begin(), val.end());
    std::sort(train.begin(), train.end());
    return {std::move(train), std::move(val)};
}

ModelBatch assemble_batch(std::span<const WindowRef> items, const ContentCatalog& catalog,
                          const FeatureConfig& feature_config, const ModelConfig& model_config) {
    if (items.empty()) throw std::invalid_argument("assemble_batch: no windows");
    const int B = static_cast<int>(items.size());
    const int L = model_config.seq_len;
    ModelBatch batch;
    batch.batch = B;
    batch.window_len = L;
    const auto n = static_cast<int>(batch.flat_size());
    batch.content_index.assign(n, -1);
    batch.query = Matrix(n, model_config.query_width);
    batch.memory = Matrix(n, model_config.memory_width);
    batch.hand = Matrix(n, model_config.hand_width);
    batch.shift_index.assign(n, -1);
    batch.allowed.assign(B, BoolMatrix(L, L));
    batch.labels.assign(n, 0.0);
    batch.loss_mask.assign(n, 0);

    for (int b = 0; b < B; ++b) {
        const UserHistory& hist = *items[b].history;
        const Window& w = items[b].window;
        if (w.len < 1 || w.start < 0 || w.start + w.len > static_cast<int>(hist.events.size()))
            throw std::invalid_argument("assemble_batch: window out of range for user " +
                                        std::to_string(hist.user_id));
        if (w.offset != L - w.len)
            throw std::invalid_argument("assemble_batch: window offset inconsistent with seq_len");
        const std::span<const InteractionEvent> events(hist.events.data() + w.start,
                                                       static_cast<std::size_t>(w.len));
        const InteractionEvent* prev = w.start > 0 ? &hist.events[w.start - 1] : nullptr;

        const QueryFeatures qf =
            compute_query_features(events, prev, catalog, feature_config, w.offset);
        const Matrix mem = compute_memory_features(events, feature_config);
        const Matrix hand_full = stream_user(hist, catalog, feature_config);

        std::vector<std::int64_t> containers(w.len);
        for (int i = 0; i < w.len; ++i) containers[i] = events[i].task_container_id;
        const ContainerPlan plan =
            make_plan(containers, std::min(model_config.effective_window(), L));

        const int base = b * L + w.offset;
        const auto width = static_cast<std::size_t>(model_config.hand_width);
        for (int i = 0; i < w.len; ++i) {
            const int row = base + i;
            batch.content_index[row] = qf.content_index[i];
            std::memcpy(batch.query.row(row), qf.real.row(i),
                        sizeof(double) * static_cast<std::size_t>(model_config.query_width));
            std::memcpy(batch.memory.row(row), mem.row(i),
                        sizeof(double) * static_cast<std::size_t>(model_config.memory_width));
            std::memcpy(batch.hand.row(row), hand_full.row(w.start + i), sizeof(double) * width);
            if (plan.shift_index[i] >= 0) batch.shift_index[row] = base + plan.shift_index[i];
            for (int j = 0; j < w.len; ++j)
                if (plan.allowed.at(i, j)) batch.allowed[b].set(w.offset + i, w.offset + j, true);
            const InteractionEvent& e = events[i];
            if (e.is_question() && e.answered_correctly) {
                batch.labels[row] = *e.answered_correctly ? 1.0 : 0.0;
                batch.loss_mask[row] = 1;
            }
        }
    }
    return batch;
}

std::string metrics_record_json(const EpochMetrics& metrics, const std::string& manifest_hash) {
    nlohmann::json j{{"epoch", metrics.epoch},       {"phase", metrics.phase},
                     {"lr", metrics.lr},             {"train_loss", metrics.train_loss},
                     {"val_auc", metrics.val_auc},   {"wall_seconds", metrics.wall_seconds}};
    if (!manifest_hash.empty()) j["manifest_hash"] = manifest_hash;
    return j.dump();
}

int worker_count(int cap) {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("KT_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) n = static_cast<int>(std::min<long>(v, 1024));
    }
    return std::max(1, std::min(n, cap));
}

EvalResult evaluate(const ModelParams& params, const ModelConfig& model_config,
                    const Histories& histories, const ContentCatalog& catalog,
                    const FeatureConfig& feature_config, std::span<const std::int64_t> users,
                    int stride, int batch_size) {
    if (batch_size < 1) throw std::invalid_argument("evaluate: batch_size must be at least 1");
    const int L = model_config.seq_len;
    const int eff_stride = stride > 0 ? stride : L;

    std::vector<WindowRef> refs;
    for (std::int64_t uid : users) {
        auto it = histories.find(uid);
        if (it == histories.end())
            throw std::invalid_argument("evaluate: unknown user " + std::to_string(uid));
        for (const Window& w : make_windows(it->second, L, eff_stride))
            refs.push_back({&it->second, w});
    }
    if (refs.empty()) throw std::invalid_argument("evaluate: no events to score");

    const std::size_t n_chunks =
        (refs.size() + static_cast<std::size_t>(batch_size) - 1) / batch_size;
    std::vector<std::vector<double>> probs(n_chunks);
    std::atomic<std::size_t> next{0};
    run_workers(worker_count(static_cast<int>(n_chunks)), [&](int) {
        for (std::size_t c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1)) {
            const std::size_t b0 = c * static_cast<std::size_t>(batch_size);
            const std::size_t b1 = std::min(b0 + batch_size, refs.size());
            const ModelBatch batch = assemble_batch(
                std::span<const WindowRef>(refs.data() + b0, b1 - b0), catalog, feature_config,
                model_config);
            Tape tape;
            probs[c] = model_forward(tape, params, model_config, batch, false, 0)->data;
        }
    });

    // Dedup overlapping windows: keep, per event, the prediction from the
    // window where the event sits at the largest in-window index.
    struct Best {
        int rel = -1;
        double score = 0.0;
    };
    std::unordered_map<std::int64_t, std::vector<Best>> best;
    for (std::size_t r = 0; r < refs.size(); ++r) {
        const Window& w = refs[r].window;
        const std::size_t c = r / static_cast<std::size_t>(batch_size);
        const std::size_t in_chunk = r - c * static_cast<std::size_t>(batch_size);
        auto& slots = best[w.user_id];
        if (slots.empty()) slots.resize(refs[r].history->events.size());
        for (int i = 0; i < w.len; ++i) {
            const int rel = w.offset + i;
            Best& slot = slots[static_cast<std::size_t>(w.start) + i];
            if (rel > slot.rel) {
                slot.rel = rel;
                slot.score = probs[c][in_chunk * static_cast<std::size_t>(L) + rel];
            }
        }
    }

    EvalResult result;
    std::vector<int> labels;
    std::vector<double> scores;
    for (std::int64_t uid : users) {
        const UserHistory& hist = histories.at(uid);
        const auto& slots = best.at(uid);
        for (std::size_t i = 0; i < hist.events.size(); ++i) {
            const InteractionEvent& e = hist.events[i];
            if (!e.is_question() || !e.answered_correctly) continue;
            if (slots[i].rel < 0)
                throw std::logic_error("evaluate: event not covered by any window");
            const int label = *e.answered_correctly ? 1 : 0;
            result.predictions.push_back({uid, e.row_id, slots[i].score, label});
            labels.push_back(label);
            scores.push_back(slots[i].score);
        }
    }
    result.auc = roc_auc(labels, scores);
    return result;
}

namespace {

struct BatchGrad {
    double mean_loss = 0.0;
    std::int64_t n_positions = 0;
    GradMap grads;
};

BatchGrad batch_gradients(const ModelParams& params, const ModelConfig& model_config,
                          const ContentCatalog& catalog, const FeatureConfig& feature_config,
                          std::span<const WindowRef> items, std::uint64_t step_key) {
    const int B = static_cast<int>(items.size());
    struct ItemOut {
        GradMap grads;
        double loss = 0.0;
        std::int64_t n = 0;
    };
    std::vector<ItemOut> outs(B);
    std::atomic<int> next{0};
    // Workers own parameter clones so concurrent backward passes never share
    // gradient buffers; items are reduced on the main thread in index order,
    // which keeps the result independent of the worker count.
    run_workers(worker_count(B), [&](int) {
        ModelParams local = clone_params(params);
        for (int b = next.fetch_add(1); b < B; b = next.fetch_add(1)) {
            const ModelBatch single =
                assemble_batch(items.subspan(b, 1), catalog, feature_config, model_config);
            std::int64_t n = 0;
            for (auto m : single.loss_mask) n += m != 0;
            if (n == 0) continue;  // lecture-only window: nothing to score
            Tape tape;
            const auto loss = model_loss(tape, local, model_config, single, true,
                                         rng::mix(step_key, static_cast<std::uint64_t>(b)));
            tape.backward(loss);
            ItemOut& out = outs[b];
            out.loss = loss->data[0];
            out.n = n;
            for (auto& [name, t] : local.tensors) {
                t->ensure_grad();
                out.grads[name] = std::move(t->grad);
                t->grad = {};
            }
        }
    });

    BatchGrad total;
    for (const auto& out : outs) total.n_positions += out.n;
    if (total.n_positions == 0)
        throw std::invalid_argument("batch has no question positions to score");
    double ce_sum = 0.0;
    for (const auto& out : outs) {
        if (out.n == 0) continue;
        ce_sum += out.loss * static_cast<double>(out.n);
        const double weight =
            static_cast<double>(out.n) / static_cast<double>(total.n_positions);
        for (const auto& [name, g] : out.grads) {
            auto& acc = total.grads[name];
            if (acc.size() != g.size()) acc.assign(g.size(), 0.0);
            for (std::size_t i = 0; i < g.size(); ++i) acc[i] += weight * g[i];
        }
    }
    total.mean_loss = ce_sum / static_cast<double>(total.n_positions);
    return total;
}

void clip_global_norm(GradMap& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& [name, g] : grads)
        for (double x : g) sq += x * x;
    const double norm = std::sqrt(sq);
    if (norm <= max_norm || norm == 0.0) return;
    const double s = max_norm / norm;
    for (auto& [name, g] : grads)
        for (double& x : g) x *= s;
}

}  // namespace

TrainResult train(const Histories& histories, const ContentCatalog& catalog,
                  ModelConfig model_config, const TrainConfig& train_config) {
    train_config.validate();
    auto [train_users, val_users] = split_users(histories, train_config.val_fraction,
                                                train_config.seed);
    {
        std::vector<std::int64_t> overlap;
        std::set_intersection(train_users.begin(), train_users.end(), val_users.begin(),
                              val_users.end(), std::back_inserter(overlap));
        if (!overlap.empty())
            throw std::logic_error("train/validation user sets overlap");
    }

    std::vector<const UserHistory*> train_refs;
    train_refs.reserve(train_users.size());
    for (std::int64_t uid : train_users) train_refs.push_back(&histories.at(uid));

    FeatureConfig feature_config;
    feature_config.n_questions = static_cast<int>(catalog.questions.size());
    feature_config.n_lectures = static_cast<int>(catalog.lectures.size());
    feature_config.n_tags = catalog.n_tags;
    feature_config.seq_len = model_config.seq_len;
    feature_config.stats = fit_standardization(std::span<const UserHistory* const>(train_refs));

    model_config.query_width = query_feature_width(feature_config);
    model_config.memory_width = kMemoryFeatureWidth;
    model_config.hand_width = handcrafted_width(feature_config);
    model_config.n_content = catalog.content_rows();
    model_config.init_seed = rng::mix(train_config.seed, kInitStream);
    model_config.validate();

    ModelParams params = init_params(model_config);
    const int L = model_config.seq_len;
    const int stride = train_config.stride > 0 ? train_config.stride : L;

    std::vector<WindowRef> train_windows;
    for (std::int64_t uid : train_users) {
        const UserHistory& hist = histories.at(uid);
        for (const Window& w : make_windows(hist, L, stride)) train_windows.push_back({&hist, w});
    }
    if (train_windows.empty()) throw std::invalid_argument("no training windows");

    if (!train_config.metrics_path.empty()) {
        std::ofstream out(train_config.metrics_path, std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write metrics file '" + train_config.metrics_path +
                                     "'");
    }

    TrainResult result;
    AdamState adam;
    const int total_epochs = train_config.epochs_phase1 + train_config.epochs_phase2;
    std::uint64_t global_step = 0;
    for (int epoch = 1; epoch <= total_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const int phase = epoch <= train_config.epochs_phase1 ? 1 : 2;
        const double lr = phase == 1 ? train_config.lr1 : train_config.lr2;

        std::vector<std::size_t> perm(train_windows.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng::Stream shuffle(
            rng::mix(rng::mix(train_config.seed, kShuffleStream), static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1], perm[static_cast<std::size_t>(
                                       shuffle.uniform_int(static_cast<std::int64_t>(i)))]);

        double ce_sum = 0.0;
        std::int64_t n_positions = 0;
        for (std::size_t off = 0; off < perm.size();
             off += static_cast<std::size_t>(train_config.batch_size)) {
            const std::size_t end =
                std::min(off + static_cast<std::size_t>(train_config.batch_size), perm.size());
            std::vector<WindowRef> items;
            items.reserve(end - off);
            for (std::size_t k = off; k < end; ++k) items.push_back(train_windows[perm[k]]);

            const std::uint64_t step_key =
                rng::mix(rng::mix(train_config.seed, kDropStream), global_step);
            BatchGrad bg = batch_gradients(params, model_config, catalog, feature_config, items,
                                           step_key);
            if (!std::isfinite(bg.mean_loss))
                throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", step " +
                                         std::to_string(global_step + 1));
            if (train_config.grad_clip > 0.0) clip_global_norm(bg.grads, train_config.grad_clip);
            adam_step(params, bg.grads, adam, lr, train_config.beta1, train_config.beta2,
                      train_config.eps);
            ce_sum += bg.mean_loss * static_cast<double>(bg.n_positions);
            n_positions += bg.n_positions;
            ++global_step;
        }

        const EvalResult val = evaluate(params, model_config, histories, catalog, feature_config,
                                        val_users, stride, train_config.batch_size);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        EpochMetrics em;
        em.epoch = epoch;
        em.phase = phase;
        em.lr = lr;
        em.train_loss = ce_sum / static_cast<double>(n_positions);
        em.val_auc = val.auc;
        em.wall_seconds = train_config.record_timings ? wall : 0.0;
        result.metrics.push_back(em);
        if (!train_config.metrics_path.empty()) {
            std::ofstream out(train_config.metrics_path, std::ios::app);
            out << metrics_record_json(em, train_config.manifest_hash) << "\n";
            if (!out)
                throw std::runtime_error("cannot append to metrics file '" +
                                         train_config.metrics_path + "'");
        }
        if (result.best_epoch == 0 || val.auc > result.best_auc) {
            result.best_auc = val.auc;
            result.best_epoch = epoch;
            result.best_params = clone_params(params);
        }
    }

    result.model_config = model_config;
    result.feature_config = feature_config;
    result.train_users = std::move(train_users);
    result.val_users = std::move(val_users);
    if (!train_config.checkpoint_path.empty())
        save_checkpoint(train_config.checkpoint_path, result.best_params, result.model_config,
                        result.feature_config, train_config.manifest_hash);
    return result;
}

double question_mean_baseline_auc(const Histories& histories,
                                  std::span<const std::int64_t> train_users,
                                  std::span<const std::int64_t> val_users) {
    std::unordered_map<std::int64_t, std::pair<std::int64_t, std::int64_t>> stats;
    std::int64_t g_correct = 0;
    std::int64_t g_total = 0;
    for (std::int64_t uid : train_users) {
        for (const InteractionEvent& e : histories.at(uid).events) {
            if (!e.is_question() || !e.answered_correctly) continue;
            auto& [correct, total] = stats[e.content_id];
            correct += *e.answered_correctly ? 1 : 0;
            ++total;
            g_correct += *e.answered_correctly ? 1 : 0;
            ++g_total;
        }
    }
    const double global_mean =
        g_total > 0 ? static_cast<double>(g_correct) / static_cast<double>(g_total) : 0.5;
    std::vector<int> labels;
    std::vector<double> scores;
    for (std::int64_t uid : val_users) {
        for (const InteractionEvent& e : histories.at(uid).events) {
            if (!e.is_question() || !e.answered_correctly) continue;
            labels.push_back(*e.answered_correctly ? 1 : 0);
            auto it = stats.find(e.content_id);
            scores.push_back(it == stats.end()
                                 ? global_mean
                                 : static_cast<double>(it->second.first) /
                                       static_cast<double>(it->second.second));
        }
    }
    return roc_auc(labels, scores);
}

double truth_ceiling_auc(const Histories& histories,
                         const std::unordered_map<std::int64_t, double>& truth,
                         std::span<const std::int64_t> val_users) {
    std::vector<int> labels;
    std::vector<double> scores;
    for (std::int64_t uid : val_users) {
        for (const InteractionEvent& e : histories.at(uid).events) {
            if (!e.is_question() || !e.answered_correctly) continue;
            auto it = truth.find(e.row_id);
            if (it == truth.end())
                throw std::invalid_argument("no ground-truth probability for row " +
                                            std::to_string(e.row_id));
            labels.push_back(*e.answered_correctly ? 1 : 0);
            scores.push_back(it->second);
        }
    }
    return roc_auc(labels, scores);
}

}  // namespace kt
