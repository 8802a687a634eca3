// kt: command-line front end for the knowledge-tracing toolkit.
//
// Every subcommand speaks JSON on stdout (or --out), logs to stderr, and
// exits 0 on success, 1 on runtime/validation errors (with a single-line
// JSON error object on stdout), 2 on usage errors. Commands that write
// artifacts also write a run.json manifest next to them; artifacts embed or
// reference the manifest hash so results trace back to their inputs.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "kt/config_io.hpp"
#include "kt/events.hpp"
#include "kt/features.hpp"
#include "kt/manifest.hpp"
#include "kt/model.hpp"
#include "kt/plan.hpp"
#include "kt/synth.hpp"
#include "kt/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string config_path;
    std::string out;
    bool pretty = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--seed", opts.seed, "Seed override for this run")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
    cmd->add_option("--config", opts.config_path, "TOML or JSON config file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opts.out, "Write the JSON result here instead of stdout");
    cmd->add_flag("--pretty", opts.pretty, "Indent JSON output and add rendered tables");
}

json scalar_from_config(const std::string& raw) {
    const json parsed = json::parse(raw, nullptr, false);
    if (!parsed.is_discarded() &&
        (parsed.is_number() || parsed.is_boolean() || parsed.is_null())) {
        return parsed;
    }
    return json(raw);
}

// CLI11's TOML reader yields flat (parents, name, inputs) items; fold them
// into the nested object shape the JSON path produces directly.
json toml_to_json(std::istream& in) {
    CLI::ConfigTOML reader;
    json root = json::object();
    for (const CLI::ConfigItem& item : reader.from_config(in)) {
        if (item.name == "++" || item.name == "--") continue;  // section markers
        json* node = &root;
        for (const std::string& parent : item.parents) {
            node = &((*node)[parent]);
        }
        if (item.inputs.size() == 1) {
            (*node)[item.name] = scalar_from_config(item.inputs[0]);
        } else {
            json arr = json::array();
            for (const std::string& v : item.inputs) arr.push_back(scalar_from_config(v));
            (*node)[item.name] = arr;
        }
    }
    return root;
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    if (fs::path(path).extension() == ".json") return json::parse(in);
    // Sniff: JSON configs may also arrive without the extension.
    char first = '\0';
    in >> std::ws;
    in.get(first);
    in.unget();
    if (first == '{') return json::parse(in);
    return toml_to_json(in);
}

template <typename T>
T section_config(const json& config, const char* section) {
    if (!config.contains(section)) return T{};
    return kt::config_with_overrides<T>(config.at(section), section);
}

void emit(const json& doc, const CommonOpts& opts) {
    const std::string text = opts.pretty ? doc.dump(2) : doc.dump();
    if (opts.out.empty()) {
        std::cout << text << "\n";
    } else {
        std::ofstream out(opts.out);
        if (!out) throw std::runtime_error("cannot open '" + opts.out + "' for writing");
        out << text << "\n";
        std::cerr << "wrote " << opts.out << "\n";
    }
}

void write_manifest_file(const kt::RunManifest& manifest, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << json(manifest).dump(2) << "\n";
}

kt::RunManifest make_manifest(const std::string& subcommand, std::uint64_t seed, json config,
                              const std::vector<std::string>& input_paths,
                              std::vector<std::string> output_paths) {
    kt::RunManifest m;
    m.subcommand = subcommand;
    m.seed = seed;
    m.config = std::move(config);
    for (const std::string& p : input_paths) m.inputs[p] = kt::file_content_hash(p);
    m.outputs = std::move(output_paths);
    return m;
}

std::vector<std::int64_t> parse_int_list(const std::string& raw) {
    std::vector<std::int64_t> out;
    std::stringstream ss(raw);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) throw std::invalid_argument("empty entry in list '" + raw + "'");
        std::size_t used = 0;
        out.push_back(std::stoll(tok, &used));
        if (used != tok.size())
            throw std::invalid_argument("'" + tok + "' is not an integer");
    }
    if (out.empty()) throw std::invalid_argument("expected a comma-separated integer list");
    return out;
}

kt::Histories load_events(const std::string& path, const std::string& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open events file '" + path + "'");
    const kt::CsvSchema s = schema == "competition" ? kt::CsvSchema::CompetitionPrior
                                                    : kt::CsvSchema::Canonical;
    return kt::parse_events(in, s);
}

kt::ContentCatalog load_catalog(const std::string& questions_path,
                                const std::string& lectures_path) {
    std::ifstream qin(questions_path);
    if (!qin) throw std::runtime_error("cannot open questions file '" + questions_path + "'");
    std::ifstream lin(lectures_path);
    if (!lin) throw std::runtime_error("cannot open lectures file '" + lectures_path + "'");
    return kt::make_catalog(kt::parse_questions_csv(qin), kt::parse_lectures_csv(lin));
}

std::vector<double> parse_value_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::vector<double> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(line, &used));
            if (used != line.size()) throw std::invalid_argument(line);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": '" + line +
                                     "' is not a number");
        }
    }
    if (out.empty()) throw std::runtime_error(path + ": no values");
    return out;
}

std::string format_value(double v) {
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

// ---------------------------------------------------------------- plan ----

struct PlanOpts {
    CommonOpts common;
    std::string containers;
    int window = 0;
};

int run_plan(const PlanOpts& o) {
    const std::vector<std::int64_t> containers = parse_int_list(o.containers);
    const kt::ContainerPlan plan =
        kt::make_plan(std::span<const std::int64_t>(containers), o.window);
    json doc;
    doc["containers"] = plan.containers;
    doc["window"] = plan.window;
    doc["starts"] = plan.starts;
    doc["shift_index"] = plan.shift_index;
    doc["mask"] = kt::mask_blocked_polarity(plan.allowed);
    if (o.common.pretty) {
        std::vector<std::string> rendered;
        for (int i = 0; i < plan.allowed.rows; ++i) {
            std::string row;
            for (int j = 0; j < plan.allowed.cols; ++j) {
                if (j > 0) row += ' ';
                row += plan.allowed.at(i, j) ? '0' : '1';
            }
            rendered.push_back(row);
        }
        doc["mask_rendered"] = rendered;
    }
    emit(doc, o.common);
    return 0;
}

// --------------------------------------------------------------- synth ----

struct SynthOpts {
    CommonOpts common;
    std::string out_dir;
    int users = -1;
    int questions = -1;
    int lectures = -1;
    int tags = -1;
    int events_min = -1;
    int events_max = -1;
};

int run_synth(const SynthOpts& o) {
    const json config = load_config(o.common.config_path);
    kt::SynthConfig cfg = section_config<kt::SynthConfig>(config, "synth");
    if (o.common.seed_set) cfg.seed = o.common.seed;
    if (o.users >= 0) cfg.n_users = o.users;
    if (o.questions >= 0) cfg.n_questions = o.questions;
    if (o.lectures >= 0) cfg.n_lectures = o.lectures;
    if (o.tags >= 0) cfg.n_tags = o.tags;
    if (o.events_min >= 0) cfg.n_events_min = o.events_min;
    if (o.events_max >= 0) cfg.n_events_max = o.events_max;
    cfg.validate();

    const kt::SynthResult result = kt::generate(cfg);
    fs::create_directories(o.out_dir);
    kt::write_synth_files(o.out_dir, result);

    const auto out_path = [&](const char* name) { return (fs::path(o.out_dir) / name).string(); };
    std::vector<std::string> inputs;
    if (!o.common.config_path.empty()) inputs.push_back(o.common.config_path);
    kt::RunManifest manifest =
        make_manifest("synth", cfg.seed, json{{"synth", cfg}}, inputs,
                      {out_path("events.csv"), out_path("questions.csv"),
                       out_path("lectures.csv"), out_path("truth.csv")});
    write_manifest_file(manifest, fs::path(o.out_dir) / "run.json");

    std::size_t events = 0;
    for (const auto& [uid, hist] : result.histories) events += hist.events.size();
    json doc;
    doc["out_dir"] = o.out_dir;
    doc["n_users"] = result.histories.size();
    doc["n_events"] = events;
    doc["n_questions"] = result.catalog.questions.size();
    doc["n_lectures"] = result.catalog.lectures.size();
    doc["truth_rows"] = result.truth.size();
    doc["seed"] = cfg.seed;
    doc["manifest_hash"] = kt::manifest_hash(manifest);
    emit(doc, o.common);
    return 0;
}

// ------------------------------------------------------------- features ----

struct FeaturesFitOpts {
    CommonOpts common;
    std::string events;
    std::string questions;
    std::string lectures;
    std::string schema = "canonical";
    int seq_len = 64;
};

int run_features_fit(const FeaturesFitOpts& o) {
    const json config = load_config(o.common.config_path);
    kt::FeatureConfig cfg = section_config<kt::FeatureConfig>(config, "features");
    const kt::Histories histories = load_events(o.events, o.schema);
    const kt::ContentCatalog catalog = load_catalog(o.questions, o.lectures);
    cfg.n_questions = static_cast<int>(catalog.questions.size());
    cfg.n_lectures = static_cast<int>(catalog.lectures.size());
    cfg.n_tags = catalog.n_tags;
    if (cfg.seq_len <= 1) cfg.seq_len = o.seq_len;
    cfg.stats = kt::fit_standardization(histories);

    std::vector<std::string> inputs = {o.events, o.questions, o.lectures};
    if (!o.common.config_path.empty()) inputs.push_back(o.common.config_path);
    std::vector<std::string> outputs;
    if (!o.common.out.empty()) outputs.push_back(o.common.out);
    const kt::RunManifest manifest =
        make_manifest("features fit", 0, json{{"features", cfg}}, inputs, outputs);

    json doc;
    doc["feature_config"] = cfg;
    doc["query_layout"] = kt::query_feature_layout(cfg);
    doc["handcrafted_layout"] = kt::handcrafted_layout(cfg);
    doc["query_width"] = kt::query_feature_width(cfg);
    doc["handcrafted_width"] = kt::handcrafted_width(cfg);
    doc["n_users"] = histories.size();
    doc["manifest_hash"] = kt::manifest_hash(manifest);
    emit(doc, o.common);
    if (!o.common.out.empty()) {
        write_manifest_file(manifest, o.common.out + ".run.json");
    }
    return 0;
}

struct FeaturesApplyOpts {
    CommonOpts common;
    std::string events;
    std::string questions;
    std::string lectures;
    std::string stats;
    std::string schema = "canonical";
    std::string out_dir;
};

int run_features_apply(const FeaturesApplyOpts& o) {
    std::ifstream stats_in(o.stats);
    if (!stats_in) throw std::runtime_error("cannot open stats file '" + o.stats + "'");
    const json stats_doc = json::parse(stats_in);
    const kt::FeatureConfig cfg = stats_doc.at("feature_config").get<kt::FeatureConfig>();

    const kt::Histories histories = load_events(o.events, o.schema);
    const kt::ContentCatalog catalog = load_catalog(o.questions, o.lectures);
    const std::vector<std::string> layout = kt::handcrafted_layout(cfg);

    fs::create_directories(o.out_dir);
    std::vector<std::string> written;
    json user_index = json::array();
    for (const auto& [uid, hist] : histories) {
        const kt::Matrix m = kt::stream_user(hist, catalog, cfg);
        const std::string name = "user_" + std::to_string(uid) + ".csv";
        const fs::path path = fs::path(o.out_dir) / name;
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
        for (std::size_t c = 0; c < layout.size(); ++c) {
            if (c > 0) out << ",";
            out << layout[c];
        }
        out << "\n";
        for (int r = 0; r < m.rows; ++r) {
            for (int c = 0; c < m.cols; ++c) {
                if (c > 0) out << ",";
                out << format_value(m.at(r, c));
            }
            out << "\n";
        }
        written.push_back(path.string());
        user_index.push_back(json{{"user_id", uid}, {"file", name}, {"rows", m.rows}});
    }

    std::vector<std::string> inputs = {o.events, o.questions, o.lectures, o.stats};
    std::vector<std::string> outputs = written;
    outputs.push_back((fs::path(o.out_dir) / "index.json").string());
    const kt::RunManifest manifest =
        make_manifest("features apply", 0, json{{"features", cfg}}, inputs, outputs);
    const std::string hash = kt::manifest_hash(manifest);

    json index;
    index["layout"] = layout;
    index["width"] = kt::handcrafted_width(cfg);
    index["users"] = user_index;
    index["manifest_hash"] = hash;
    std::ofstream index_out(fs::path(o.out_dir) / "index.json");
    index_out << index.dump(2) << "\n";
    write_manifest_file(manifest, fs::path(o.out_dir) / "run.json");

    json doc;
    doc["out_dir"] = o.out_dir;
    doc["n_users"] = histories.size();
    doc["width"] = kt::handcrafted_width(cfg);
    doc["manifest_hash"] = hash;
    emit(doc, o.common);
    return 0;
}

// --------------------------------------------------------------- train ----

struct TrainOpts {
    CommonOpts common;
    std::string events;
    std::string questions;
    std::string lectures;
    std::string truth;
    std::string schema = "canonical";
    std::string out_dir;
    bool timings = false;
};

int run_train(const TrainOpts& o) {
    const json config = load_config(o.common.config_path);
    kt::ModelConfig mcfg = kt::desk_model_config();
    if (config.contains("model")) {
        json merged = mcfg;
        merged.merge_patch(config.at("model"));
        for (const auto& [key, value] : config.at("model").items()) {
            (void)value;
            if (!json(kt::desk_model_config()).contains(key))
                throw std::invalid_argument("unknown key '" + key + "' in config section 'model'");
        }
        mcfg = merged.get<kt::ModelConfig>();
    }
    kt::TrainConfig tcfg = kt::desk_train_config();
    if (config.contains("train")) {
        json merged = tcfg;
        merged.merge_patch(config.at("train"));
        for (const auto& [key, value] : config.at("train").items()) {
            (void)value;
            if (!json(kt::desk_train_config()).contains(key))
                throw std::invalid_argument("unknown key '" + key + "' in config section 'train'");
        }
        tcfg = merged.get<kt::TrainConfig>();
    }
    if (o.common.seed_set) tcfg.seed = o.common.seed;
    // Byte-identical reruns by default; wall-clock timing is opt-in.
    tcfg.record_timings = o.timings;

    const kt::Histories histories = load_events(o.events, o.schema);
    const kt::ContentCatalog catalog = load_catalog(o.questions, o.lectures);

    fs::create_directories(o.out_dir);
    const std::string ckpt_path = (fs::path(o.out_dir) / "checkpoint.rkt").string();
    const std::string metrics_path = (fs::path(o.out_dir) / "metrics.jsonl").string();
    tcfg.checkpoint_path = ckpt_path;
    tcfg.metrics_path = metrics_path;

    std::vector<std::string> inputs = {o.events, o.questions, o.lectures};
    if (!o.common.config_path.empty()) inputs.push_back(o.common.config_path);
    if (!o.truth.empty()) inputs.push_back(o.truth);
    const kt::RunManifest manifest =
        make_manifest("train", tcfg.seed, json{{"model", mcfg}, {"train", tcfg}}, inputs,
                      {ckpt_path, metrics_path});
    tcfg.manifest_hash = kt::manifest_hash(manifest);
    write_manifest_file(manifest, fs::path(o.out_dir) / "run.json");

    const kt::TrainResult result = kt::train(histories, catalog, mcfg, tcfg);

    json doc;
    doc["best_auc"] = result.best_auc;
    doc["best_epoch"] = result.best_epoch;
    doc["epochs"] = result.metrics.size();
    doc["n_train_users"] = result.train_users.size();
    doc["n_val_users"] = result.val_users.size();
    doc["checkpoint"] = ckpt_path;
    doc["metrics"] = metrics_path;
    doc["manifest_hash"] = tcfg.manifest_hash;
    doc["baseline_auc"] =
        kt::question_mean_baseline_auc(histories, result.train_users, result.val_users);
    if (!o.truth.empty()) {
        std::ifstream tin(o.truth);
        if (!tin) throw std::runtime_error("cannot open truth file '" + o.truth + "'");
        doc["truth_ceiling_auc"] =
            kt::truth_ceiling_auc(histories, kt::parse_truth_csv(tin), result.val_users);
    }
    if (o.common.pretty) {
        json table = json::array();
        for (const auto& m : result.metrics) {
            table.push_back(kt::metrics_record_json(m, ""));
        }
        doc["epoch_table"] = table;
    }
    emit(doc, o.common);
    return 0;
}

// ---------------------------------------------------------------- eval ----

struct EvalOpts {
    CommonOpts common;
    std::string checkpoint;
    std::string events;
    std::string questions;
    std::string lectures;
    std::string truth;
    std::string schema = "canonical";
    std::string predictions;
    int stride = 0;
    int batch_size = 32;
};

int run_eval(const EvalOpts& o) {
    const kt::Checkpoint ckpt = kt::load_checkpoint(o.checkpoint);
    const kt::Histories histories = load_events(o.events, o.schema);
    const kt::ContentCatalog catalog = load_catalog(o.questions, o.lectures);
    if (catalog.content_rows() != ckpt.model_config.n_content) {
        throw std::invalid_argument(
            "metadata lists " + std::to_string(catalog.content_rows()) +
            " content rows but the checkpoint was trained with " +
            std::to_string(ckpt.model_config.n_content));
    }
    std::vector<std::int64_t> users;
    for (const auto& [uid, hist] : histories) users.push_back(uid);

    const kt::EvalResult result =
        kt::evaluate(ckpt.params, ckpt.model_config, histories, catalog, ckpt.feature_config,
                     users, o.stride, o.batch_size);

    std::vector<std::string> outputs;
    if (!o.predictions.empty()) outputs.push_back(o.predictions);
    std::vector<std::string> inputs = {o.checkpoint, o.events, o.questions, o.lectures};
    if (!o.truth.empty()) inputs.push_back(o.truth);
    const kt::RunManifest manifest = make_manifest(
        "eval", 0, json{{"stride", o.stride}, {"batch_size", o.batch_size}}, inputs, outputs);
    const std::string hash = kt::manifest_hash(manifest);

    if (!o.predictions.empty()) {
        std::ofstream out(o.predictions);
        if (!out) throw std::runtime_error("cannot open '" + o.predictions + "' for writing");
        out << "row_id,user_id,score,label\n";
        for (const auto& p : result.predictions) {
            out << p.row_id << "," << p.user_id << "," << format_value(p.score) << ","
                << p.label << "\n";
        }
        write_manifest_file(manifest, o.predictions + ".run.json");
    }

    json doc;
    doc["auc"] = result.auc;
    doc["n_predictions"] = result.predictions.size();
    doc["n_users"] = users.size();
    doc["manifest_hash"] = hash;
    if (!ckpt.run_manifest_hash.empty()) doc["checkpoint_manifest_hash"] = ckpt.run_manifest_hash;
    if (!o.truth.empty()) {
        std::ifstream tin(o.truth);
        if (!tin) throw std::runtime_error("cannot open truth file '" + o.truth + "'");
        doc["truth_ceiling_auc"] =
            kt::truth_ceiling_auc(histories, kt::parse_truth_csv(tin), users);
    }
    emit(doc, o.common);
    return 0;
}

// ----------------------------------------------------------- gradcheck ----

struct GradcheckOpts {
    CommonOpts common;
    std::string scale = "micro";
    double eps = 1e-5;
};

int run_gradcheck(const GradcheckOpts& o) {
    kt::ModelConfig mcfg;
    mcfg.dropout_rate = 0.0;
    int window_len = 0;
    if (o.scale == "micro") {
        mcfg.d_model = 4;
        mcfg.n_heads = 2;
        mcfg.embed_dim = 3;
        window_len = 6;
    } else if (o.scale == "small") {
        mcfg.d_model = 8;
        mcfg.n_heads = 2;
        mcfg.embed_dim = 8;
        window_len = 12;
    } else {
        throw std::invalid_argument("unknown gradcheck scale '" + o.scale +
                                    "' (expected micro or small)");
    }
    mcfg.seq_len = window_len;
    mcfg.init_seed = o.common.seed_set ? o.common.seed : 1;

    // Two synthetic users with exactly one full window each, run through the
    // real feature and batching pipeline.
    kt::SynthConfig scfg;
    scfg.n_users = 2;
    scfg.n_questions = 20;
    scfg.n_lectures = 3;
    scfg.n_tags = 5;
    scfg.n_events_min = window_len;
    scfg.n_events_max = window_len;
    scfg.seed = mcfg.init_seed;
    const kt::SynthResult corpus = kt::generate(scfg);

    kt::FeatureConfig fcfg;
    fcfg.n_questions = static_cast<int>(corpus.catalog.questions.size());
    fcfg.n_lectures = static_cast<int>(corpus.catalog.lectures.size());
    fcfg.n_tags = corpus.catalog.n_tags;
    fcfg.seq_len = window_len;
    fcfg.stats = kt::fit_standardization(corpus.histories);
    mcfg.query_width = kt::query_feature_width(fcfg);
    mcfg.hand_width = kt::handcrafted_width(fcfg);
    mcfg.n_content = corpus.catalog.content_rows();

    std::vector<kt::WindowRef> refs;
    for (const auto& [uid, hist] : corpus.histories) {
        for (const kt::Window& w : kt::make_windows(hist, window_len, window_len)) {
            refs.push_back({&hist, w});
        }
    }
    const kt::ModelBatch batch = kt::assemble_batch(refs, corpus.catalog, fcfg, mcfg);
    const kt::ModelParams params = kt::init_params(mcfg);

    const double err = kt::gradcheck(
        [&](kt::Tape& tape) { return kt::model_loss(tape, params, mcfg, batch); }, params.all(),
        o.eps);

    json doc;
    doc["max_rel_err"] = err;
    doc["eps"] = o.eps;
    doc["scale"] = o.scale;
    doc["tolerance"] = 1e-5;
    doc["passed"] = err <= 1e-5;
    doc["n_positions"] = batch.flat_size();
    emit(doc, o.common);
    return 0;
}

// ----------------------------------------------------------------- auc ----

struct AucOpts {
    CommonOpts common;
    std::string labels;
    std::string scores;
};

int run_auc(const AucOpts& o) {
    const std::vector<double> raw_labels = parse_value_file(o.labels);
    const std::vector<double> scores = parse_value_file(o.scores);
    std::vector<int> labels;
    labels.reserve(raw_labels.size());
    for (double v : raw_labels) {
        if (v != 0.0 && v != 1.0)
            throw std::invalid_argument("labels must be 0 or 1, got " + format_value(v));
        labels.push_back(static_cast<int>(v));
    }
    const double auc = kt::roc_auc(labels, scores);
    json doc;
    doc["auc"] = auc;
    doc["n"] = labels.size();
    emit(doc, o.common);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kt: container-aware knowledge tracing toolkit"};
    app.require_subcommand(1);

    PlanOpts plan_opts;
    SynthOpts synth_opts;
    FeaturesFitOpts fit_opts;
    FeaturesApplyOpts apply_opts;
    TrainOpts train_opts;
    EvalOpts eval_opts;
    GradcheckOpts grad_opts;
    AucOpts auc_opts;
    std::function<int()> action;

    CLI::App* plan_cmd =
        app.add_subcommand("plan", "Container starts, shift indices and attention mask");
    plan_cmd->add_option("--containers", plan_opts.containers,
                         "Comma-separated task container ids")->required();
    plan_cmd->add_option("--window", plan_opts.window, "Attention window W")
        ->required()
        ->check(CLI::PositiveNumber);
    add_common(plan_cmd, plan_opts.common);
    plan_cmd->callback([&] { action = [&] { return run_plan(plan_opts); }; });

    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic student corpus");
    synth_cmd->add_option("--out-dir", synth_opts.out_dir, "Output directory")->required();
    synth_cmd->add_option("--users", synth_opts.users, "Number of users");
    synth_cmd->add_option("--questions", synth_opts.questions, "Number of questions");
    synth_cmd->add_option("--lectures", synth_opts.lectures, "Number of lectures");
    synth_cmd->add_option("--tags", synth_opts.tags, "Number of tags");
    synth_cmd->add_option("--events-min", synth_opts.events_min, "Minimum events per user");
    synth_cmd->add_option("--events-max", synth_opts.events_max, "Maximum events per user");
    add_common(synth_cmd, synth_opts.common);
    synth_cmd->callback([&] { action = [&] { return run_synth(synth_opts); }; });

    CLI::App* features_cmd =
        app.add_subcommand("features", "Hand-crafted feature engine");
    features_cmd->require_subcommand(1);
    CLI::App* fit_cmd =
        features_cmd->add_subcommand("fit", "Fit standardization stats and layout");
    fit_cmd->add_option("--events", fit_opts.events, "Canonical events CSV")->required();
    fit_cmd->add_option("--questions", fit_opts.questions, "Questions metadata CSV")->required();
    fit_cmd->add_option("--lectures", fit_opts.lectures, "Lectures metadata CSV")->required();
    fit_cmd->add_option("--schema", fit_opts.schema, "Events schema: canonical or competition")
        ->check(CLI::IsMember({"canonical", "competition"}));
    fit_cmd->add_option("--seq-len", fit_opts.seq_len, "Window length stored in the config");
    add_common(fit_cmd, fit_opts.common);
    fit_cmd->callback([&] { action = [&] { return run_features_fit(fit_opts); }; });

    CLI::App* apply_cmd =
        features_cmd->add_subcommand("apply", "Stream per-user feature matrices");
    apply_cmd->add_option("--events", apply_opts.events, "Canonical events CSV")->required();
    apply_cmd->add_option("--questions", apply_opts.questions, "Questions metadata CSV")
        ->required();
    apply_cmd->add_option("--lectures", apply_opts.lectures, "Lectures metadata CSV")->required();
    apply_cmd->add_option("--stats", apply_opts.stats, "Stats JSON from features fit")
        ->required();
    apply_cmd->add_option("--schema", apply_opts.schema,
                          "Events schema: canonical or competition")
        ->check(CLI::IsMember({"canonical", "competition"}));
    apply_cmd->add_option("--out-dir", apply_opts.out_dir, "Output directory")->required();
    add_common(apply_cmd, apply_opts.common);
    apply_cmd->callback([&] { action = [&] { return run_features_apply(apply_opts); }; });

    CLI::App* train_cmd = app.add_subcommand("train", "Train the attention model");
    train_cmd->add_option("--events", train_opts.events, "Canonical events CSV")->required();
    train_cmd->add_option("--questions", train_opts.questions, "Questions metadata CSV")
        ->required();
    train_cmd->add_option("--lectures", train_opts.lectures, "Lectures metadata CSV")->required();
    train_cmd->add_option("--truth", train_opts.truth,
                          "Truth CSV for reporting the dataset ceiling");
    train_cmd->add_option("--schema", train_opts.schema,
                          "Events schema: canonical or competition")
        ->check(CLI::IsMember({"canonical", "competition"}));
    train_cmd->add_option("--out-dir", train_opts.out_dir, "Output directory")->required();
    train_cmd->add_flag("--timings", train_opts.timings,
                        "Record wall-clock seconds in metrics (breaks byte-identical reruns)");
    add_common(train_cmd, train_opts.common);
    train_cmd->callback([&] { action = [&] { return run_train(train_opts); }; });

    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_cmd->add_option("--checkpoint", eval_opts.checkpoint, "Checkpoint file")->required();
    eval_cmd->add_option("--events", eval_opts.events, "Canonical events CSV")->required();
    eval_cmd->add_option("--questions", eval_opts.questions, "Questions metadata CSV")
        ->required();
    eval_cmd->add_option("--lectures", eval_opts.lectures, "Lectures metadata CSV")->required();
    eval_cmd->add_option("--truth", eval_opts.truth,
                         "Truth CSV for reporting the dataset ceiling");
    eval_cmd->add_option("--schema", eval_opts.schema,
                         "Events schema: canonical or competition")
        ->check(CLI::IsMember({"canonical", "competition"}));
    eval_cmd->add_option("--predictions", eval_opts.predictions,
                         "Write per-event predictions CSV here");
    eval_cmd->add_option("--stride", eval_opts.stride, "Window stride (0 = window length)");
    eval_cmd->add_option("--batch-size", eval_opts.batch_size, "Eval batch size")
        ->check(CLI::PositiveNumber);
    add_common(eval_cmd, eval_opts.common);
    eval_cmd->callback([&] { action = [&] { return run_eval(eval_opts); }; });

    CLI::App* grad_cmd =
        app.add_subcommand("gradcheck", "Finite-difference check of the full model");
    grad_cmd->add_option("--scale", grad_opts.scale, "micro (d4) or small (d8)")
        ->check(CLI::IsMember({"micro", "small"}));
    grad_cmd->add_option("--eps", grad_opts.eps, "Central difference step");
    add_common(grad_cmd, grad_opts.common);
    grad_cmd->callback([&] { action = [&] { return run_gradcheck(grad_opts); }; });

    CLI::App* auc_cmd = app.add_subcommand("auc", "Rank AUC from label and score files");
    auc_cmd->add_option("--labels", auc_opts.labels, "File with one 0/1 label per line")
        ->required();
    auc_cmd->add_option("--scores", auc_opts.scores, "File with one score per line")->required();
    add_common(auc_cmd, auc_opts.common);
    auc_cmd->callback([&] { action = [&] { return run_auc(auc_opts); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        return action ? action() : 2;
    } catch (const std::exception& e) {
        std::cout << json{{"error", e.what()}}.dump() << "\n";
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
