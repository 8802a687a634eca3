// Python bindings for the core operations: container plans, the rank AUC,
// the synthetic generator, feature streaming, and a model gradient check.
// Heavyweight workflows (training, evaluation) stay in the kt CLI.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <span>
#include <sstream>
#include <vector>

#include "kt/events.hpp"
#include "kt/features.hpp"
#include "kt/manifest.hpp"
#include "kt/model.hpp"
#include "kt/plan.hpp"
#include "kt/synth.hpp"
#include "kt/tensor.hpp"
#include "kt/trainer.hpp"

namespace py = pybind11;

namespace {

py::dict plan_dict(const std::vector<std::int64_t>& containers, int window) {
    const kt::ContainerPlan plan =
        kt::make_plan(std::span<const std::int64_t>(containers), window);
    py::dict out;
    out["containers"] = plan.containers;
    out["window"] = plan.window;
    out["starts"] = plan.starts;
    out["shift_index"] = plan.shift_index;
    out["mask"] = kt::mask_blocked_polarity(plan.allowed);
    return out;
}

py::dict synth_summary(int users, int questions, int lectures, int tags, int events_min,
                       int events_max, std::uint64_t seed) {
    kt::SynthConfig cfg;
    cfg.n_users = users;
    cfg.n_questions = questions;
    cfg.n_lectures = lectures;
    cfg.n_tags = tags;
    cfg.n_events_min = events_min;
    cfg.n_events_max = events_max;
    cfg.seed = seed;
    cfg.validate();
    const kt::SynthResult result = kt::generate(cfg);
    std::size_t events = 0;
    std::size_t correct = 0;
    for (const auto& [uid, hist] : result.histories) {
        events += hist.events.size();
        for (const kt::InteractionEvent& e : hist.events) {
            if (e.answered_correctly == 1) ++correct;
        }
    }
    py::dict out;
    out["n_users"] = result.histories.size();
    out["n_events"] = events;
    out["n_truth_rows"] = result.truth.size();
    out["n_correct"] = correct;
    return out;
}

py::list stream_features(int users, int questions, int lectures, int tags, int events_min,
                         int events_max, std::uint64_t seed, std::int64_t user_id) {
    kt::SynthConfig cfg;
    cfg.n_users = users;
    cfg.n_questions = questions;
    cfg.n_lectures = lectures;
    cfg.n_tags = tags;
    cfg.n_events_min = events_min;
    cfg.n_events_max = events_max;
    cfg.seed = seed;
    cfg.validate();
    const kt::SynthResult corpus = kt::generate(cfg);
    const auto it = corpus.histories.find(user_id);
    if (it == corpus.histories.end()) throw std::invalid_argument("no such user");
    kt::FeatureConfig fcfg;
    fcfg.n_questions = static_cast<int>(corpus.catalog.questions.size());
    fcfg.n_lectures = static_cast<int>(corpus.catalog.lectures.size());
    fcfg.n_tags = corpus.catalog.n_tags;
    fcfg.stats = kt::fit_standardization(corpus.histories);
    const kt::Matrix m = kt::stream_user(it->second, corpus.catalog, fcfg);
    py::list rows;
    for (int r = 0; r < m.rows; ++r) {
        py::list row;
        for (int c = 0; c < m.cols; ++c) row.append(m.at(r, c));
        rows.append(row);
    }
    return rows;
}

double gradcheck_micro(std::uint64_t seed, double eps) {
    kt::ModelConfig mcfg;
    mcfg.d_model = 4;
    mcfg.n_heads = 2;
    mcfg.embed_dim = 3;
    mcfg.seq_len = 6;
    mcfg.dropout_rate = 0.0;
    mcfg.init_seed = seed;

    kt::SynthConfig scfg;
    scfg.n_users = 2;
    scfg.n_questions = 20;
    scfg.n_lectures = 3;
    scfg.n_tags = 5;
    scfg.n_events_min = mcfg.seq_len;
    scfg.n_events_max = mcfg.seq_len;
    scfg.seed = seed;
    const kt::SynthResult corpus = kt::generate(scfg);

    kt::FeatureConfig fcfg;
    fcfg.n_questions = static_cast<int>(corpus.catalog.questions.size());
    fcfg.n_lectures = static_cast<int>(corpus.catalog.lectures.size());
    fcfg.n_tags = corpus.catalog.n_tags;
    fcfg.seq_len = mcfg.seq_len;
    fcfg.stats = kt::fit_standardization(corpus.histories);
    mcfg.query_width = kt::query_feature_width(fcfg);
    mcfg.hand_width = kt::handcrafted_width(fcfg);
    mcfg.n_content = corpus.catalog.content_rows();

    std::vector<kt::WindowRef> refs;
    for (const auto& [uid, hist] : corpus.histories) {
        for (const kt::Window& w : kt::make_windows(hist, mcfg.seq_len, mcfg.seq_len)) {
            refs.push_back({&hist, w});
        }
    }
    const kt::ModelBatch batch = kt::assemble_batch(refs, corpus.catalog, fcfg, mcfg);
    const kt::ModelParams params = kt::init_params(mcfg);
    return kt::gradcheck(
        [&](kt::Tape& tape) { return kt::model_loss(tape, params, mcfg, batch); }, params.all(),
        eps);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Container-aware knowledge tracing: core operations";
    m.attr("__version__") = kt::kToolVersion;

    m.def("make_plan", &plan_dict, py::arg("containers"), py::arg("window"),
          "Container starts, one-step shift indices and the blocked-polarity "
          "attention mask for a sequence of task container ids.");

    m.def(
        "roc_auc",
        [](const std::vector<int>& labels, const std::vector<double>& scores) {
            return kt::roc_auc(std::span<const int>(labels), std::span<const double>(scores));
        },
        py::arg("labels"), py::arg("scores"),
        "Rank-based ROC AUC with average tie handling.");

    m.def("synth_summary", &synth_summary, py::arg("users") = 10, py::arg("questions") = 30,
          py::arg("lectures") = 4, py::arg("tags") = 6, py::arg("events_min") = 10,
          py::arg("events_max") = 25, py::arg("seed") = 0,
          "Generate a synthetic corpus and return corpus-level counts.");

    m.def("stream_features", &stream_features, py::arg("users") = 4, py::arg("questions") = 20,
          py::arg("lectures") = 3, py::arg("tags") = 5, py::arg("events_min") = 10,
          py::arg("events_max") = 20, py::arg("seed") = 0, py::arg("user_id") = 0,
          "Stream the hand-crafted feature matrix for one synthetic user.");

    m.def("gradcheck_micro", &gradcheck_micro, py::arg("seed") = 1, py::arg("eps") = 1e-5,
          "Max relative error between analytic and central-difference gradients "
          "for a micro model on real pipeline data.");
}
