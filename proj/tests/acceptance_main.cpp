// Acceptance harness. Each criterion prints exactly one PASS/FAIL line with
// its wall time; the process exits nonzero if any criterion fails or runs
// over its budget. Criteria are fixed-seed and self-contained: they build
// their own corpora and models, and criterion 1 drives the installed CLI
// binary end to end.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "kt/events.hpp"
#include "kt/features.hpp"
#include "kt/model.hpp"
#include "kt/plan.hpp"
#include "kt/synth.hpp"
#include "kt/tensor.hpp"
#include "kt/trainer.hpp"

#ifndef KT_CLI_PATH
#error "KT_CLI_PATH must point at the kt binary"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kt;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

std::string run_cli(const std::string& args, int& exit_code) {
    const std::string cmd = std::string(KT_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    require(pipe != nullptr, "could not spawn CLI");
    std::string out;
    char buf[4096];
    std::size_t n = 0;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) out.append(buf, n);
    const int status = pclose(pipe);
    exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return out;
}

// ------------------------------------------------------------ criterion 1

const std::vector<int> kReferenceStarts = {0, 0, 2, 2, 4, 5, 6, 7, 7, 9};
const std::vector<int> kReferenceShift = {-1, -1, 1, 1, 3, 4, 5, 6, 6, 8};
const std::vector<std::vector<int>> kReferenceMask = {
    {1, 1, 1, 1, 1, 1, 1, 1, 1, 1}, {1, 1, 1, 1, 1, 1, 1, 1, 1, 1},
    {0, 0, 1, 1, 1, 1, 1, 1, 1, 1}, {0, 0, 1, 1, 1, 1, 1, 1, 1, 1},
    {0, 0, 0, 0, 1, 1, 1, 1, 1, 1}, {0, 0, 0, 0, 0, 1, 1, 1, 1, 1},
    {1, 0, 0, 0, 0, 0, 1, 1, 1, 1}, {1, 1, 0, 0, 0, 0, 0, 1, 1, 1},
    {1, 1, 0, 0, 0, 0, 0, 1, 1, 1}, {1, 1, 1, 1, 0, 0, 0, 0, 0, 1}};

void criterion_plan_via_cli() {
    int exit_code = -1;
    const std::string out = run_cli("plan --containers 2,2,3,3,4,5,6,7,7,8 --window 5", exit_code);
    require(exit_code == 0, "CLI exited with code " + std::to_string(exit_code));
    const json doc = json::parse(out);
    require(doc.at("starts").get<std::vector<int>>() == kReferenceStarts, "starts differ");
    require(doc.at("shift_index").get<std::vector<int>>() == kReferenceShift,
            "shift indices differ");
    require(doc.at("mask").get<std::vector<std::vector<int>>>() == kReferenceMask, "mask differs");
}

// ------------------------------------------------------------ criterion 2

struct RefPlan {
    std::vector<int> starts;
    std::vector<int> shift;
    std::vector<std::vector<bool>> allowed;
};

// Literal restatement of the definitions, independent of the library code:
// starts by linear scan over adjacent equality, window by direct bounds.
RefPlan reference_plan(const std::vector<std::int64_t>& c, int window) {
    const int n = static_cast<int>(c.size());
    RefPlan ref;
    ref.starts.resize(n);
    ref.shift.resize(n);
    ref.allowed.assign(n, std::vector<bool>(n, false));
    for (int i = 0; i < n; ++i) {
        ref.starts[i] = (i > 0 && c[i] == c[i - 1]) ? ref.starts[i - 1] : i;
        ref.shift[i] = ref.starts[i] - 1;
        const int lo = std::max(0, ref.starts[i] - window);
        const int hi = ref.starts[i] - 1;
        for (int j = lo; j <= hi; ++j) ref.allowed[i][j] = true;
    }
    return ref;
}

void criterion_plan_oracle() {
    std::mt19937_64 gen(20260823);
    for (int trial = 0; trial < 1000; ++trial) {
        const int length = std::uniform_int_distribution<int>(1, 64)(gen);
        std::vector<std::int64_t> c;
        std::int64_t next_id = std::uniform_int_distribution<std::int64_t>(0, 5)(gen);
        while (static_cast<int>(c.size()) < length) {
            const int run = std::uniform_int_distribution<int>(1, 6)(gen);
            for (int k = 0; k < run && static_cast<int>(c.size()) < length; ++k)
                c.push_back(next_id);
            // Ids may repeat non-adjacently; runs are defined by adjacency.
            next_id = std::uniform_int_distribution<int>(0, 1)(gen) == 0
                          ? next_id + 1
                          : std::uniform_int_distribution<std::int64_t>(0, 5)(gen);
            if (!c.empty() && next_id == c.back()) ++next_id;
        }
        const int window = std::uniform_int_distribution<int>(1, 8)(gen);
        const ContainerPlan plan = make_plan(std::span<const std::int64_t>(c), window);
        const RefPlan ref = reference_plan(c, window);
        require(plan.starts == ref.starts, "starts mismatch at trial " + std::to_string(trial));
        require(plan.shift_index == ref.shift,
                "shift mismatch at trial " + std::to_string(trial));
        for (int i = 0; i < length; ++i)
            for (int j = 0; j < length; ++j)
                require(plan.allowed.at(i, j) == ref.allowed[i][j],
                        "mask mismatch at trial " + std::to_string(trial) + " cell (" +
                            std::to_string(i) + "," + std::to_string(j) + ")");
    }
}

// ------------------------------------------------------------ criterion 3

struct PipelineFixture {
    SynthResult corpus;
    FeatureConfig fcfg;
    ModelConfig mcfg;
    ModelBatch batch;
};

// Synthetic corpus pushed through the real feature, windowing and batching
// pipeline: n_users histories of exactly window_len events each.
PipelineFixture pipeline_fixture(int n_users, int window_len, ModelConfig mcfg,
                                 std::uint64_t seed) {
    PipelineFixture f;
    SynthConfig scfg;
    scfg.n_users = n_users;
    scfg.n_questions = 20;
    scfg.n_lectures = 3;
    scfg.n_tags = 5;
    scfg.n_events_min = window_len;
    scfg.n_events_max = window_len;
    scfg.seed = seed;
    f.corpus = generate(scfg);

    f.fcfg.n_questions = static_cast<int>(f.corpus.catalog.questions.size());
    f.fcfg.n_lectures = static_cast<int>(f.corpus.catalog.lectures.size());
    f.fcfg.n_tags = f.corpus.catalog.n_tags;
    f.fcfg.seq_len = window_len;
    f.fcfg.stats = fit_standardization(f.corpus.histories);

    mcfg.seq_len = window_len;
    mcfg.query_width = query_feature_width(f.fcfg);
    mcfg.hand_width = handcrafted_width(f.fcfg);
    mcfg.n_content = f.corpus.catalog.content_rows();
    f.mcfg = mcfg;

    std::vector<WindowRef> refs;
    for (const auto& [uid, hist] : f.corpus.histories) {
        for (const Window& w : make_windows(hist, window_len, window_len))
            refs.push_back({&hist, w});
    }
    f.batch = assemble_batch(refs, f.corpus.catalog, f.fcfg, f.mcfg);
    return f;
}

void criterion_gradcheck() {
    ModelConfig mcfg;
    mcfg.d_model = 8;
    mcfg.n_heads = 2;
    mcfg.embed_dim = 8;
    mcfg.dropout_rate = 0.0;
    mcfg.init_seed = 1;
    const PipelineFixture f = pipeline_fixture(2, 12, mcfg, 1);
    require(f.batch.batch == 2 && f.batch.window_len == 12,
            "fixture is not 2 users x 12 positions");
    const ModelParams params = init_params(f.mcfg);
    const double err = gradcheck(
        [&](Tape& tape) { return model_loss(tape, params, f.mcfg, f.batch); }, params.all(),
        1e-5);
    require(std::isfinite(err), "gradient check returned a non-finite error");
    require(err <= 1e-5, "max relative error " + std::to_string(err) + " exceeds 1e-5");
}

// ------------------------------------------------------------ criterion 4

std::vector<double> forward_scores(const ModelParams& params, const ModelConfig& cfg,
                                   const ModelBatch& batch) {
    Tape tape;
    const TensorPtr probs = model_forward(tape, params, cfg, batch);
    return probs->data;
}

void criterion_leakage() {
    std::mt19937_64 gen(404);
    auto unit = [&]() { return std::uniform_real_distribution<double>(-1.0, 1.0)(gen); };
    for (int trial = 0; trial < 100; ++trial) {
        ModelConfig mcfg;
        mcfg.d_model = 2 * std::uniform_int_distribution<int>(2, 4)(gen);
        mcfg.n_heads = std::uniform_int_distribution<int>(1, 2)(gen);
        mcfg.embed_dim = std::uniform_int_distribution<int>(2, 4)(gen);
        mcfg.query_width = std::uniform_int_distribution<int>(2, 5)(gen);
        mcfg.hand_width = std::uniform_int_distribution<int>(2, 5)(gen);
        mcfg.n_content = 6;
        mcfg.dropout_rate = 0.0;
        mcfg.init_seed = 1000 + trial;

        const int L = std::uniform_int_distribution<int>(4, 10)(gen);
        mcfg.seq_len = L;
        std::vector<std::int64_t> containers;
        std::int64_t id = 0;
        while (static_cast<int>(containers.size()) < L) {
            const int run = std::uniform_int_distribution<int>(1, 3)(gen);
            for (int k = 0; k < run && static_cast<int>(containers.size()) < L; ++k)
                containers.push_back(id);
            ++id;
        }
        const int window = std::uniform_int_distribution<int>(1, L)(gen);
        const ContainerPlan plan =
            make_plan(std::span<const std::int64_t>(containers), window);

        ModelBatch batch;
        batch.batch = 1;
        batch.window_len = L;
        batch.content_index.resize(L);
        batch.query = Matrix(L, mcfg.query_width);
        batch.memory = Matrix(L, kMemoryFeatureWidth);
        batch.hand = Matrix(L, mcfg.hand_width);
        batch.shift_index = plan.shift_index;
        batch.allowed = {plan.allowed};
        batch.labels.resize(L);
        batch.loss_mask.assign(L, 1);
        for (int i = 0; i < L; ++i) {
            batch.content_index[i] =
                std::uniform_int_distribution<int>(0, mcfg.n_content - 1)(gen);
            batch.labels[i] = std::uniform_int_distribution<int>(0, 1)(gen);
        }
        for (double& v : batch.query.v) v = unit();
        for (double& v : batch.memory.v) v = unit();
        for (double& v : batch.hand.v) v = unit();

        const ModelParams params = init_params(mcfg);
        const std::vector<double> base = forward_scores(params, mcfg, batch);

        const int run_start = plan.starts[std::uniform_int_distribution<int>(0, L - 1)(gen)];
        ModelBatch poked = batch;
        for (int i = run_start; i < L; ++i) {
            for (int c = 0; c < poked.memory.cols; ++c) poked.memory.at(i, c) += unit() + 2.0;
            for (int c = 0; c < poked.hand.cols; ++c) poked.hand.at(i, c) += unit() + 2.0;
            poked.labels[i] = 1.0 - poked.labels[i];
        }
        const std::vector<double> after = forward_scores(params, mcfg, poked);

        bool later_changed = false;
        bool later_exists = false;
        for (int i = 0; i < L; ++i) {
            if (plan.starts[i] <= run_start) {
                require(base[i] == after[i],
                        "trial " + std::to_string(trial) + ": prediction at position " +
                            std::to_string(i) + " moved although only run starts >= " +
                            std::to_string(run_start) + " were perturbed");
            } else {
                later_exists = true;
                later_changed = later_changed || base[i] != after[i];
            }
        }
        require(!later_exists || later_changed,
                "trial " + std::to_string(trial) +
                    ": perturbation did not reach any later position, test has no teeth");
    }
}

// ------------------------------------------------------------ criterion 5

// From-scratch recomputation of the hand-crafted vector for one position,
// written against the documented column order rather than the streaming
// engine: plain counters over the events of containers that close before
// the run holding position i.
std::vector<double> batch_oracle_row(const UserHistory& hist, int i, const ContentCatalog& catalog,
                                     const FeatureConfig& cfg) {
    int run_start = i;
    while (run_start > 0 &&
           hist.events[run_start - 1].task_container_id == hist.events[i].task_container_id) {
        --run_start;
    }

    std::int64_t answered = 0;
    std::int64_t answered_correct = 0;
    std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> per_content;
    std::vector<std::int64_t> part_att(8, 0), part_cor(8, 0);
    std::vector<std::int64_t> tag_att(cfg.n_tags, 0), tag_cor(cfg.n_tags, 0);
    std::vector<std::int64_t> lect_part(8, 0), lect_type(4, 0), lect_tag(cfg.n_tags, 0);
    std::int64_t expl_after_correct = 0, expl_after_incorrect = 0, expl_total = 0;
    std::int64_t elapsed_sum = 0, elapsed_n = 0;
    std::vector<std::int64_t> answer_counts(4, 0);

    for (int j = 0; j < run_start; ++j) {
        const InteractionEvent& e = hist.events[j];
        if (e.is_question()) {
            const QuestionMeta& q = catalog.question(e.content_id);
            const bool cor = e.answered_correctly.value_or(false);
            answered += 1;
            answered_correct += cor ? 1 : 0;
            per_content[e.content_id].first += 1;
            per_content[e.content_id].second += cor ? 1 : 0;
            part_att[q.part] += 1;
            part_cor[q.part] += cor ? 1 : 0;
            for (int t : q.tags) {
                tag_att[t] += 1;
                tag_cor[t] += cor ? 1 : 0;
            }
            if (e.had_explanation.value_or(false)) {
                expl_total += 1;
                (cor ? expl_after_correct : expl_after_incorrect) += 1;
            }
            if (e.elapsed_time_ms) {
                elapsed_sum += *e.elapsed_time_ms;
                elapsed_n += 1;
            }
            if (e.user_answer) answer_counts[*e.user_answer] += 1;
        } else {
            const LectureMeta& l = catalog.lecture(e.content_id);
            lect_part[l.part] += 1;
            lect_type[static_cast<int>(l.type_of)] += 1;
            lect_tag[l.tag] += 1;
        }
    }

    auto rat = [&](std::int64_t num, std::int64_t den) {
        return den > 0 ? static_cast<double>(num) / static_cast<double>(den) : cfg.ratio_default;
    };
    auto cnt = [&](std::int64_t c) {
        return cfg.count_transform == CountTransform::Log1p ? std::log1p(static_cast<double>(c))
                                                            : static_cast<double>(c);
    };

    const InteractionEvent& cur = hist.events[i];
    std::vector<int> cur_tags;
    if (cur.is_question()) {
        cur_tags = catalog.question(cur.content_id).tags;
    } else {
        cur_tags = {catalog.lecture(cur.content_id).tag};
    }

    std::vector<double> out;
    out.push_back(rat(answered_correct, answered));
    out.push_back(cnt(answered));
    std::int64_t ca = 0, cc = 0;
    if (cur.is_question()) {
        auto it = per_content.find(cur.content_id);
        if (it != per_content.end()) {
            ca = it->second.first;
            cc = it->second.second;
        }
    }
    out.push_back(rat(cc, ca));
    out.push_back(cnt(ca));
    for (int p = 1; p <= 7; ++p) out.push_back(rat(part_cor[p], part_att[p]));
    for (int p = 1; p <= 7; ++p) out.push_back(cnt(part_att[p]));
    if (cfg.tag_scope == TagScope::CurrentQuestion) {
        std::int64_t att = 0, cor = 0;
        for (int t : cur_tags) {
            att += tag_att[t];
            cor += tag_cor[t];
        }
        out.push_back(rat(cor, att));
        out.push_back(cnt(att));
    } else {
        for (int t = 0; t < cfg.n_tags; ++t) out.push_back(rat(tag_cor[t], tag_att[t]));
        for (int t = 0; t < cfg.n_tags; ++t) out.push_back(cnt(tag_att[t]));
    }
    for (int p = 1; p <= 7; ++p) out.push_back(cnt(lect_part[p]));
    for (int t = 0; t < 4; ++t) out.push_back(cnt(lect_type[t]));
    if (cfg.tag_scope == TagScope::CurrentQuestion) {
        std::int64_t n = 0;
        for (int t : cur_tags) n += lect_tag[t];
        out.push_back(cnt(n));
    } else {
        for (int t = 0; t < cfg.n_tags; ++t) out.push_back(cnt(lect_tag[t]));
    }
    out.push_back(rat(expl_after_correct, answered_correct));
    out.push_back(rat(expl_after_incorrect, answered - answered_correct));
    out.push_back(cnt(expl_total));
    out.push_back(elapsed_n > 0
                      ? standardize(static_cast<double>(elapsed_sum) /
                                        static_cast<double>(elapsed_n),
                                    cfg.stats.elapsed_time)
                      : 0.0);
    for (int a = 0; a < 4; ++a) out.push_back(rat(answer_counts[a], answered));
    return out;
}

void criterion_streaming_vs_batch() {
    SynthConfig scfg;
    scfg.n_users = 50;
    scfg.n_questions = 150;
    scfg.n_lectures = 10;
    scfg.n_tags = 12;
    scfg.n_events_min = 180;
    scfg.n_events_max = 220;
    scfg.seed = 505;
    const SynthResult corpus = generate(scfg);

    for (const TagScope scope : {TagScope::CurrentQuestion, TagScope::AllTags}) {
        for (const CountTransform transform : {CountTransform::Log1p, CountTransform::Raw}) {
            FeatureConfig cfg;
            cfg.n_questions = static_cast<int>(corpus.catalog.questions.size());
            cfg.n_lectures = static_cast<int>(corpus.catalog.lectures.size());
            cfg.n_tags = corpus.catalog.n_tags;
            cfg.tag_scope = scope;
            cfg.count_transform = transform;
            cfg.ratio_default = 0.5;
            cfg.stats = fit_standardization(corpus.histories);

            const std::vector<std::string> layout = handcrafted_layout(cfg);
            std::vector<bool> is_ratio(layout.size());
            for (std::size_t c = 0; c < layout.size(); ++c) {
                is_ratio[c] = layout[c].find("ratio") != std::string::npos ||
                              layout[c] == "mean_elapsed_std";
            }

            for (const auto& [uid, hist] : corpus.histories) {
                const Matrix streamed = stream_user(hist, corpus.catalog, cfg);
                require(streamed.cols == static_cast<int>(layout.size()),
                        "streamed width does not match the layout");
                for (int i = 0; i < streamed.rows; ++i) {
                    const std::vector<double> want =
                        batch_oracle_row(hist, i, corpus.catalog, cfg);
                    for (std::size_t c = 0; c < want.size(); ++c) {
                        const double got = streamed.at(i, static_cast<int>(c));
                        if (is_ratio[c]) {
                            require(std::abs(got - want[c]) <= 1e-12,
                                    "user " + std::to_string(uid) + " row " + std::to_string(i) +
                                        " column " + layout[c] + ": " + std::to_string(got) +
                                        " vs oracle " + std::to_string(want[c]));
                        } else {
                            require(got == want[c],
                                    "user " + std::to_string(uid) + " row " + std::to_string(i) +
                                        " count column " + layout[c] + " differs");
                        }
                    }
                }
            }
        }
    }
}

// ------------------------------------------------------------ criterion 6

void criterion_auc_oracle() {
    std::mt19937_64 gen(606);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = std::uniform_int_distribution<int>(2, 400)(gen);
        std::vector<int> labels(n);
        std::vector<double> scores(n);
        const double p = std::uniform_real_distribution<double>(0.2, 0.8)(gen);
        const bool quantize = std::uniform_int_distribution<int>(0, 1)(gen) == 1;
        const int levels = std::uniform_int_distribution<int>(2, 10)(gen);
        bool has0 = false, has1 = false;
        do {
            has0 = has1 = false;
            for (int i = 0; i < n; ++i) {
                labels[i] = std::bernoulli_distribution(p)(gen) ? 1 : 0;
                double s = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
                if (quantize) s = std::floor(s * levels) / levels;
                scores[i] = s;
                (labels[i] ? has1 : has0) = true;
            }
        } while (!has0 || !has1);
        const double fast = roc_auc(labels, scores);
        const double slow = roc_auc_pairwise(labels, scores);
        require(std::abs(fast - slow) <= 1e-12,
                "trial " + std::to_string(trial) + ": rank AUC " + std::to_string(fast) +
                    " vs pairwise " + std::to_string(slow));
    }
}

// ------------------------------------------------------------ criterion 7

// Logistic regression on the streamed hand-crafted vectors, reported for
// context next to the attention model. Full-batch gradient descent is
// plenty: features are ratios, log counts and standardized means.
double lr_handcrafted_auc(const SynthResult& corpus, const FeatureConfig& fcfg,
                          std::span<const std::int64_t> train_users,
                          std::span<const std::int64_t> val_users) {
    const int width = handcrafted_width(fcfg);
    auto collect = [&](std::span<const std::int64_t> users, int stride, std::vector<double>& x,
                       std::vector<int>& y) {
        for (const std::int64_t uid : users) {
            const UserHistory& hist = corpus.histories.at(uid);
            const Matrix m = stream_user(hist, corpus.catalog, fcfg);
            for (int i = 0; i < m.rows; i += stride) {
                const InteractionEvent& e = hist.events[i];
                if (!e.is_question() || !e.answered_correctly) continue;
                x.insert(x.end(), m.v.begin() + static_cast<std::size_t>(i) * width,
                         m.v.begin() + static_cast<std::size_t>(i + 1) * width);
                y.push_back(*e.answered_correctly ? 1 : 0);
            }
        }
    };
    std::vector<double> train_x, val_x;
    std::vector<int> train_y, val_y;
    collect(train_users, 3, train_x, train_y);
    collect(val_users, 1, val_x, val_y);

    std::vector<double> w(width + 1, 0.0);
    const std::size_t n = train_y.size();
    std::vector<double> grad(width + 1);
    for (int iter = 0; iter < 150; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            const double* row = train_x.data() + r * width;
            double z = w[width];
            for (int c = 0; c < width; ++c) z += w[c] * row[c];
            const double err = 1.0 / (1.0 + std::exp(-z)) - train_y[r];
            for (int c = 0; c < width; ++c) grad[c] += err * row[c];
            grad[width] += err;
        }
        const double lr = iter < 50 ? 0.5 : 0.1;
        for (int c = 0; c <= width; ++c) w[c] -= lr * grad[c] / static_cast<double>(n);
    }

    std::vector<double> scores(val_y.size());
    for (std::size_t r = 0; r < val_y.size(); ++r) {
        const double* row = val_x.data() + r * width;
        double z = w[width];
        for (int c = 0; c < width; ++c) z += w[c] * row[c];
        scores[r] = 1.0 / (1.0 + std::exp(-z));
    }
    return roc_auc(val_y, scores);
}

void criterion_desk_scale(std::string& info) {
    SynthConfig scfg;
    scfg.n_users = 2000;
    scfg.n_questions = 500;
    scfg.n_lectures = 20;
    scfg.n_tags = 30;
    scfg.n_events_min = 120;
    scfg.n_events_max = 180;
    scfg.seed = 20260823;
    const SynthResult corpus = generate(scfg);

    const ModelConfig mcfg = desk_model_config();
    TrainConfig tcfg = desk_train_config();
    tcfg.seed = 77;
    tcfg.record_timings = false;
    const TrainResult result = train(corpus.histories, corpus.catalog, mcfg, tcfg);

    const double baseline =
        question_mean_baseline_auc(corpus.histories, result.train_users, result.val_users);
    const double ceiling = truth_ceiling_auc(corpus.histories, corpus.truth, result.val_users);
    const double lr_auc =
        lr_handcrafted_auc(corpus, result.feature_config, result.train_users, result.val_users);

    std::ostringstream ss;
    ss << "val_auc=" << result.best_auc << " baseline=" << baseline << " ceiling=" << ceiling
       << " lr_handcrafted=" << lr_auc;
    info = ss.str();

    require(result.best_auc >= 0.65,
            "validation AUC " + std::to_string(result.best_auc) + " below 0.65");
    require(result.best_auc >= baseline + 0.01,
            "validation AUC " + std::to_string(result.best_auc) +
                " does not beat the per-question baseline " + std::to_string(baseline) +
                " by 0.01");
    require(result.best_auc < ceiling, "validation AUC " + std::to_string(result.best_auc) +
                                           " is not below the ground-truth ceiling " +
                                           std::to_string(ceiling));
}

// ------------------------------------------------------------ criterion 8

void criterion_determinism(const fs::path& workdir) {
    SynthConfig scfg;
    scfg.n_users = 60;
    scfg.n_questions = 60;
    scfg.n_lectures = 5;
    scfg.n_tags = 8;
    scfg.n_events_min = 40;
    scfg.n_events_max = 80;
    scfg.seed = 808;
    const SynthResult corpus = generate(scfg);

    ModelConfig mcfg;
    mcfg.d_model = 16;
    mcfg.n_heads = 2;
    mcfg.seq_len = 16;
    mcfg.embed_dim = 8;
    mcfg.dropout_rate = 0.1;

    const fs::path ckpt_path = workdir / "det_checkpoint.rkt";
    TrainConfig tcfg;
    tcfg.batch_size = 16;
    tcfg.epochs_phase1 = 2;
    tcfg.epochs_phase2 = 1;
    tcfg.seed = 5;
    tcfg.record_timings = false;
    tcfg.manifest_hash = "fnv1a:0000000000000808";
    tcfg.checkpoint_path = ckpt_path.string();
    tcfg.metrics_path = (workdir / "det_metrics_a.jsonl").string();
    const TrainResult a = train(corpus.histories, corpus.catalog, mcfg, tcfg);

    tcfg.metrics_path = (workdir / "det_metrics_b.jsonl").string();
    const TrainResult b = train(corpus.histories, corpus.catalog, mcfg, tcfg);

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const std::string metrics_a = slurp(workdir / "det_metrics_a.jsonl");
    require(!metrics_a.empty(), "first run wrote no metrics");
    require(metrics_a == slurp(workdir / "det_metrics_b.jsonl"),
            "metrics JSON differs between identical runs");
    for (const auto& [name, tensor] : a.best_params.tensors) {
        require(tensor->data == b.best_params.at(name)->data,
                "parameter '" + name + "' differs between identical runs");
    }

    std::vector<std::int64_t> users;
    for (const auto& [uid, hist] : corpus.histories) users.push_back(uid);
    const EvalResult direct = evaluate(a.best_params, a.model_config, corpus.histories,
                                       corpus.catalog, a.feature_config, users, 0, 16);

    const Checkpoint loaded = load_checkpoint(ckpt_path.string());
    require(loaded.run_manifest_hash == "fnv1a:0000000000000808",
            "checkpoint lost the manifest hash");
    const EvalResult reloaded = evaluate(loaded.params, loaded.model_config, corpus.histories,
                                         corpus.catalog, loaded.feature_config, users, 0, 16);

    require(direct.predictions.size() == reloaded.predictions.size(),
            "prediction counts differ after checkpoint reload");
    for (std::size_t i = 0; i < direct.predictions.size(); ++i) {
        require(direct.predictions[i].score == reloaded.predictions[i].score &&
                    direct.predictions[i].row_id == reloaded.predictions[i].row_id,
                "prediction " + std::to_string(i) + " differs after checkpoint reload");
    }
}

// ------------------------------------------------------------ criterion 9

void criterion_degenerate_reduction() {
    std::mt19937_64 gen(909);
    for (int trial = 0; trial < 200; ++trial) {
        const int length = std::uniform_int_distribution<int>(1, 64)(gen);
        std::vector<std::int64_t> containers(length);
        for (int i = 0; i < length; ++i) containers[i] = 10 * i + 3;  // all singleton runs
        const int window = length + std::uniform_int_distribution<int>(0, 8)(gen);
        const ContainerPlan plan =
            make_plan(std::span<const std::int64_t>(containers), window);
        for (int i = 0; i < length; ++i) {
            require(plan.starts[i] == i, "singleton start is not the position itself");
            require(plan.shift_index[i] == i - 1, "shift is not the one-step shift");
            for (int j = 0; j < length; ++j) {
                require(plan.allowed.at(i, j) == (j < i),
                        "mask is not strictly causal at (" + std::to_string(i) + "," +
                            std::to_string(j) + ")");
            }
        }
    }
}

// -------------------------------------------------------------- harness

struct Criterion {
    int id;
    const char* title;
    double budget_seconds;
    std::function<void(std::string&)> body;
};

}  // namespace

int main() {
    const fs::path workdir =
        fs::temp_directory_path() / ("kt_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(workdir);

    const std::vector<Criterion> criteria = {
        {1, "reference-example plan fidelity through the CLI", 1.0,
         [](std::string&) { criterion_plan_via_cli(); }},
        {2, "1000 randomized plans match the reference oracle", 10.0,
         [](std::string&) { criterion_plan_oracle(); }},
        {3, "full-model gradient check, 2 users x 12 positions, d_model 8", 60.0,
         [](std::string&) { criterion_gradcheck(); }},
        {4, "no inter-container leakage over 100 randomized trials", 60.0,
         [](std::string&) { criterion_leakage(); }},
        {5, "streaming features equal the batch oracle on 50 users", 30.0,
         [](std::string&) { criterion_streaming_vs_batch(); }},
        {6, "rank AUC equals the pairwise oracle on 100 instances", 10.0,
         [](std::string&) { criterion_auc_oracle(); }},
        {7, "learning at desk scale beats the per-question baseline", 1800.0,
         [](std::string& info) { criterion_desk_scale(info); }},
        {8, "byte-identical reruns and bit-identical checkpoint reload", 300.0,
         [&workdir](std::string&) { criterion_determinism(workdir); }},
        {9, "singleton containers reduce to strict causal masking", 5.0,
         [](std::string&) { criterion_degenerate_reduction(); }},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string info;
        std::string error;
        try {
            c.body(info);
        } catch (const std::exception& e) {
            error = e.what();
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool ok = error.empty();
        if (ok && seconds > c.budget_seconds) {
            error = "over budget";
            ok = false;
        }
        if (!ok) ++failures;
        std::printf("%s  %d. %-55s %7.2fs / %gs budget%s%s\n", ok ? "PASS" : "FAIL", c.id,
                    c.title, seconds, c.budget_seconds, error.empty() ? "" : "  -- ",
                    error.c_str());
        if (!info.empty()) std::printf("      %s\n", info.c_str());
        std::fflush(stdout);
    }

    std::error_code ec;
    fs::remove_all(workdir, ec);

    std::printf("acceptance: %d/%d criteria passed\n",
                static_cast<int>(criteria.size()) - failures,
                static_cast<int>(criteria.size()));
    return failures == 0 ? 0 : 1;
}
