#include "kt/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "kt/rng.hpp"

namespace kt {

namespace {

// Independent stream ids so metadata and per-user draws never overlap.
constexpr std::uint64_t kMetaStream = 0x4d455441;  // "META"
constexpr std::uint64_t kUserStream = 0x55534552;  // "USER"

// Container-to-container gap in ms: LogNormal, median ~22 s.
constexpr double kGapLogMean = 10.0;
constexpr double kGapLogSd = 1.0;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void SynthConfig::validate() const {
    if (n_users < 1) throw std::invalid_argument("n_users must be at least 1");
    if (n_questions < 1) throw std::invalid_argument("n_questions must be at least 1");
    if (n_lectures < 0) throw std::invalid_argument("n_lectures must be non-negative");
    if (n_tags < 1) throw std::invalid_argument("n_tags must be at least 1");
    if (n_events_min < 1 || n_events_max < n_events_min)
        throw std::invalid_argument("need 1 <= n_events_min <= n_events_max");
    if (container_size_weights.empty())
        throw std::invalid_argument("container_size_weights must not be empty");
    double total = 0.0;
    for (double w : container_size_weights) {
        if (w < 0.0) throw std::invalid_argument("container size weights must be non-negative");
        total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("container size weights must not all be zero");
    if (lecture_prob < 0.0 || lecture_prob > 1.0)
        throw std::invalid_argument("lecture_prob must lie in [0, 1]");
    if (explanation_prob < 0.0 || explanation_prob > 1.0)
        throw std::invalid_argument("explanation_prob must lie in [0, 1]");
    if (gamma < 0.0) throw std::invalid_argument("gamma must be non-negative");
    if (elapsed_log_sd < 0.0) throw std::invalid_argument("elapsed_log_sd must be non-negative");
}

SynthResult generate(const SynthConfig& config) {
    config.validate();

    rng::Stream meta(rng::mix(config.seed, kMetaStream));
    std::vector<QuestionMeta> questions(config.n_questions);
    std::vector<double> difficulty(config.n_questions);
    std::vector<double> discrimination(config.n_questions);
    for (int q = 0; q < config.n_questions; ++q) {
        auto& meta_q = questions[q];
        meta_q.question_id = q;
        meta_q.part = 1 + static_cast<int>(meta.uniform_int(7));
        const int k = 1 + static_cast<int>(meta.uniform_int(std::min(3, config.n_tags)));
        while (static_cast<int>(meta_q.tags.size()) < k) {
            const int tag = static_cast<int>(meta.uniform_int(config.n_tags));
            if (std::find(meta_q.tags.begin(), meta_q.tags.end(), tag) == meta_q.tags.end())
                meta_q.tags.push_back(tag);
        }
        meta_q.correct_answer = static_cast<int>(meta.uniform_int(4));
        difficulty[q] = meta.normal();
        discrimination[q] = meta.lognormal(0.0, 0.25);
    }
    std::vector<LectureMeta> lectures(config.n_lectures);
    for (int l = 0; l < config.n_lectures; ++l) {
        lectures[l].lecture_id = l;
        lectures[l].tag = static_cast<int>(meta.uniform_int(config.n_tags));
        lectures[l].part = 1 + static_cast<int>(meta.uniform_int(7));
        lectures[l].type_of = static_cast<LectureType>(meta.uniform_int(4));
    }

    SynthResult result;
    result.catalog = make_catalog(questions, lectures, config.n_tags);
    result.theta.resize(config.n_users);

    struct PendingTruth {
        std::int64_t user_id;
        std::size_t event_pos;
        double p;
    };
    std::vector<PendingTruth> truths;

    const int span = config.n_events_max - config.n_events_min + 1;
    for (int u = 0; u < config.n_users; ++u) {
        rng::Stream stream(rng::mix(rng::mix(config.seed, kUserStream), static_cast<std::uint64_t>(u)));
        const double theta = stream.normal();
        result.theta[u] = theta;
        const int n_events = config.n_events_min + static_cast<int>(stream.uniform_int(span));

        UserHistory history;
        history.user_id = u;
        history.events.reserve(n_events);
        std::int64_t ts = 0;
        std::int64_t container = 0;
        // Committed attempts per part: questions from earlier containers only,
        // matching what a running-aggregate feature can observe.
        std::array<std::int64_t, 8> part_attempts{};

        while (static_cast<int>(history.events.size()) < n_events) {
            const int remaining = n_events - static_cast<int>(history.events.size());
            if (config.n_lectures > 0 && stream.bernoulli(config.lecture_prob)) {
                const int l = static_cast<int>(stream.uniform_int(config.n_lectures));
                InteractionEvent e;
                e.user_id = u;
                e.timestamp_ms = ts;
                e.content_id = l;
                e.content_type = ContentType::Lecture;
                e.task_container_id = container;
                history.events.push_back(e);
            } else {
                int size = 1 + static_cast<int>(stream.categorical(config.container_size_weights));
                size = std::min(size, remaining);
                std::vector<int> chosen;
                chosen.reserve(size);
                for (int s = 0; s < size; ++s) {
                    int q = static_cast<int>(stream.uniform_int(config.n_questions));
                    for (int attempt = 0; attempt < 16; ++attempt) {
                        if (std::find(chosen.begin(), chosen.end(), q) == chosen.end()) break;
                        q = static_cast<int>(stream.uniform_int(config.n_questions));
                    }
                    chosen.push_back(q);
                }
                const bool explained = stream.bernoulli(config.explanation_prob);
                for (int q : chosen) {
                    const auto& meta_q = questions[q];
                    const double practice =
                        config.gamma * std::log1p(static_cast<double>(part_attempts[meta_q.part]));
                    const double p =
                        sigmoid(discrimination[q] * (theta + practice - difficulty[q]));
                    const bool correct = stream.bernoulli(p);
                    int answer = meta_q.correct_answer;
                    if (!correct) {
                        const int other = static_cast<int>(stream.uniform_int(3));
                        answer = other >= meta_q.correct_answer ? other + 1 : other;
                    }
                    InteractionEvent e;
                    e.user_id = u;
                    e.timestamp_ms = ts;
                    e.content_id = q;
                    e.content_type = ContentType::Question;
                    e.task_container_id = container;
                    e.user_answer = answer;
                    e.answered_correctly = correct;
                    e.elapsed_time_ms = std::max<std::int64_t>(
                        1, static_cast<std::int64_t>(
                               stream.lognormal(config.elapsed_log_mean, config.elapsed_log_sd)));
                    e.had_explanation = explained;
                    truths.push_back({history.user_id, history.events.size(), p});
                    history.events.push_back(e);
                }
                for (int q : chosen) ++part_attempts[questions[q].part];
            }
            ++container;
            ts += 1 + static_cast<std::int64_t>(stream.lognormal(kGapLogMean, kGapLogSd));
        }
        result.histories.emplace(history.user_id, std::move(history));
    }

    // Global row ids in user order, then attach truth rows.
    std::int64_t next_row = 0;
    for (auto& [uid, history] : result.histories)
        for (auto& e : history.events) e.row_id = next_row++;
    for (const auto& t : truths)
        result.truth.emplace(result.histories.at(t.user_id).events[t.event_pos].row_id, t.p);

    for (const auto& [uid, history] : result.histories) {
        const auto violations = validate_history(history);
        if (!violations.empty())
            throw std::logic_error("generated history for user " + std::to_string(uid) +
                                   " violates invariants: " + violations.front().message);
    }
    return result;
}

void write_truth_csv(std::ostream& out, const SynthResult& result) {
    std::vector<std::pair<std::int64_t, double>> rows(result.truth.begin(), result.truth.end());
    std::sort(rows.begin(), rows.end());
    out << "row_id,p_correct\n";
    out << std::setprecision(17);
    for (const auto& [row_id, p] : rows) out << row_id << "," << p << "\n";
}

std::unordered_map<std::int64_t, double> parse_truth_csv(std::istream& in) {
    std::unordered_map<std::int64_t, double> truth;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("truth csv: empty file");
    if (line != "row_id,p_correct")
        throw ParseError("truth csv: unexpected header '" + line + "'");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError("truth csv line " + std::to_string(line_no) + ": expected 2 fields");
        try {
            const std::int64_t row_id = std::stoll(line.substr(0, comma));
            const double p = std::stod(line.substr(comma + 1));
            truth[row_id] = p;
        } catch (const std::exception&) {
            throw ParseError("truth csv line " + std::to_string(line_no) + ": bad value");
        }
    }
    return truth;
}

void write_synth_files(const std::string& dir, const SynthResult& result) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
        if (!out) throw std::runtime_error(std::string("cannot write ") + name + " under " + dir);
        return out;
    };
    {
        auto out = open("events.csv");
        write_canonical_csv(out, result.histories);
    }
    {
        auto out = open("questions.csv");
        write_questions_csv(out, result.catalog.questions);
    }
    {
        auto out = open("lectures.csv");
        write_lectures_csv(out, result.catalog.lectures);
    }
    {
        auto out = open("truth.csv");
        write_truth_csv(out, result);
    }
}

}  // namespace kt
