#include "kt/events.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace kt {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

[[noreturn]] void fail(std::size_t row, const std::string& column, const std::string& what) {
    throw ParseError("row " + std::to_string(row) + ", column '" + column + "': " + what);
}

std::int64_t parse_int(const std::string& s, std::size_t row, const std::string& column) {
    std::int64_t value = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) fail(row, column, "not an integer: '" + s + "'");
    return value;
}

// The competition dumps carry floats ("13000.0") and blanks in the prior
// elapsed column.
std::optional<std::int64_t> parse_prior_elapsed(const std::string& s, std::size_t row,
                                                const std::string& column) {
    if (s.empty()) return std::nullopt;
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) fail(row, column, "not a number: '" + s + "'");
        if (v < 0) return std::nullopt;
        return static_cast<std::int64_t>(v);
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception&) {
        fail(row, column, "not a number: '" + s + "'");
    }
}

std::optional<bool> parse_prior_explanation(const std::string& s, std::size_t row,
                                            const std::string& column) {
    if (s.empty()) return std::nullopt;
    if (s == "True" || s == "true" || s == "1") return true;
    if (s == "False" || s == "false" || s == "0") return false;
    fail(row, column, "not a boolean: '" + s + "'");
}

std::optional<std::int64_t> sentinel_optional(std::int64_t v) {
    if (v == -1) return std::nullopt;
    return v;
}

const std::vector<std::string> kCanonicalColumns = {
    "row_id",         "user_id",     "timestamp_ms",       "content_id",
    "content_type",   "task_container_id", "user_answer",  "answered_correctly",
    "elapsed_time_ms", "had_explanation"};

const std::vector<std::string> kCompetitionColumns = {
    "row_id",          "timestamp",         "user_id",
    "content_id",      "content_type_id",   "task_container_id",
    "user_answer",     "answered_correctly", "prior_question_elapsed_time",
    "prior_question_had_explanation"};

void check_header(const std::vector<std::string>& fields, const std::vector<std::string>& expect) {
    if (fields != expect) {
        std::string want;
        for (const auto& c : expect) want += (want.empty() ? "" : ",") + c;
        std::string got;
        for (const auto& c : fields) got += (got.empty() ? "" : ",") + c;
        throw ParseError("bad header: expected '" + want + "', got '" + got + "'");
    }
}

InteractionEvent parse_canonical_row(const std::vector<std::string>& f, std::size_t row) {
    InteractionEvent e;
    e.row_id = parse_int(f[0], row, "row_id");
    e.user_id = parse_int(f[1], row, "user_id");
    e.timestamp_ms = parse_int(f[2], row, "timestamp_ms");
    e.content_id = parse_int(f[3], row, "content_id");
    const std::int64_t ct = parse_int(f[4], row, "content_type");
    if (ct != 0 && ct != 1) fail(row, "content_type", "must be 0 (question) or 1 (lecture)");
    e.content_type = ct == 0 ? ContentType::Question : ContentType::Lecture;
    e.task_container_id = parse_int(f[5], row, "task_container_id");
    const std::int64_t ua = parse_int(f[6], row, "user_answer");
    if (ua < -1 || ua > 3) fail(row, "user_answer", "must be in {0,1,2,3} or -1");
    if (ua >= 0) e.user_answer = static_cast<int>(ua);
    const std::int64_t ac = parse_int(f[7], row, "answered_correctly");
    if (ac < -1 || ac > 1) fail(row, "answered_correctly", "must be 0, 1 or -1");
    if (ac >= 0) e.answered_correctly = ac == 1;
    const std::int64_t el = parse_int(f[8], row, "elapsed_time_ms");
    if (el < -1) fail(row, "elapsed_time_ms", "must be >= 0 or -1");
    e.elapsed_time_ms = sentinel_optional(el);
    const std::int64_t hx = parse_int(f[9], row, "had_explanation");
    if (hx < -1 || hx > 1) fail(row, "had_explanation", "must be 0, 1 or -1");
    if (hx >= 0) e.had_explanation = hx == 1;
    return e;
}

InteractionEvent parse_competition_row(const std::vector<std::string>& f, std::size_t row) {
    InteractionEvent e;
    e.row_id = parse_int(f[0], row, "row_id");
    e.timestamp_ms = parse_int(f[1], row, "timestamp");
    e.user_id = parse_int(f[2], row, "user_id");
    e.content_id = parse_int(f[3], row, "content_id");
    const std::int64_t ct = parse_int(f[4], row, "content_type_id");
    if (ct != 0 && ct != 1) fail(row, "content_type_id", "must be 0 (question) or 1 (lecture)");
    e.content_type = ct == 0 ? ContentType::Question : ContentType::Lecture;
    e.task_container_id = parse_int(f[5], row, "task_container_id");
    const std::int64_t ua = parse_int(f[6], row, "user_answer");
    if (ua < -1 || ua > 3) fail(row, "user_answer", "must be in {0,1,2,3} or -1");
    if (e.is_question()) {
        if (ua == -1) fail(row, "user_answer", "required for question rows");
        e.user_answer = static_cast<int>(ua);
        const std::int64_t ac = parse_int(f[7], row, "answered_correctly");
        if (ac != 0 && ac != 1) fail(row, "answered_correctly", "must be 0 or 1 for questions");
        e.answered_correctly = ac == 1;
    } else {
        if (ua != -1) fail(row, "user_answer", "must be -1 for lectures");
        const std::int64_t ac = parse_int(f[7], row, "answered_correctly");
        if (ac != -1) fail(row, "answered_correctly", "must be -1 for lectures");
    }
    e.prior_elapsed_time_ms = parse_prior_elapsed(f[8], row, "prior_question_elapsed_time");
    e.prior_had_explanation = parse_prior_explanation(f[9], row, "prior_question_had_explanation");
    return e;
}

void check_event_fields(const InteractionEvent& e, std::size_t row) {
    if (e.content_type == ContentType::Lecture) {
        if (e.user_answer || e.answered_correctly || e.elapsed_time_ms || e.had_explanation) {
            fail(row, "content_type", "lecture rows must not carry answer/timing fields");
        }
    } else {
        if (!e.user_answer) fail(row, "user_answer", "required for question rows");
        if (!e.answered_correctly) fail(row, "answered_correctly", "required for question rows");
    }
}

// Index of the run start for each event (maximal runs of equal adjacent ids).
std::vector<std::size_t> event_run_starts(const std::vector<InteractionEvent>& events) {
    std::vector<std::size_t> starts(events.size());
    std::size_t run_start = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (i > 0 && events[i].task_container_id != events[i - 1].task_container_id) run_start = i;
        starts[i] = run_start;
    }
    return starts;
}

}  // namespace

Histories parse_events(std::istream& in, CsvSchema schema) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty input: missing header row");
    const auto& expect = schema == CsvSchema::Canonical ? kCanonicalColumns : kCompetitionColumns;
    check_header(split_csv_line(line), expect);

    Histories histories;
    std::unordered_set<std::int64_t> seen_row_ids;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != expect.size()) {
            throw ParseError("row " + std::to_string(row) + ": expected " +
                             std::to_string(expect.size()) + " fields, got " +
                             std::to_string(fields.size()));
        }
        InteractionEvent e = schema == CsvSchema::Canonical ? parse_canonical_row(fields, row)
                                                            : parse_competition_row(fields, row);
        if (schema == CsvSchema::Canonical) check_event_fields(e, row);
        if (!seen_row_ids.insert(e.row_id).second) {
            throw ParseError("row " + std::to_string(row) + ": duplicate row_id " +
                             std::to_string(e.row_id));
        }
        auto& hist = histories[e.user_id];
        hist.user_id = e.user_id;
        hist.events.push_back(e);
    }
    if (schema == CsvSchema::CompetitionPrior) {
        for (auto& [uid, hist] : histories) hist = adapt_prior_fields(std::move(hist));
    }
    return histories;
}

UserHistory adapt_prior_fields(UserHistory history) {
    auto& events = history.events;
    if (events.empty()) return history;
    const bool any_staged = std::any_of(events.begin(), events.end(), [](const InteractionEvent& e) {
        return e.prior_elapsed_time_ms.has_value() || e.prior_had_explanation.has_value();
    });
    if (!any_staged) return history;  // canonical input, nothing to shift

    const std::vector<std::size_t> starts = event_run_starts(events);
    std::vector<std::size_t> run_begin;
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (starts[i] == i) run_begin.push_back(i);
    }

    for (std::size_t r = 0; r < run_begin.size(); ++r) {
        const std::size_t b = run_begin[r];
        const std::size_t e = r + 1 < run_begin.size() ? run_begin[r + 1] : events.size();
        std::optional<std::int64_t> elapsed;
        std::optional<bool> explanation;
        if (r + 1 < run_begin.size()) {
            const InteractionEvent& next_first = events[run_begin[r + 1]];
            elapsed = next_first.prior_elapsed_time_ms;
            explanation = next_first.prior_had_explanation;
        }
        for (std::size_t i = b; i < e; ++i) {
            if (events[i].is_question()) {
                events[i].elapsed_time_ms = elapsed;
                events[i].had_explanation = explanation;
            }
        }
    }
    for (auto& ev : events) {
        ev.prior_elapsed_time_ms.reset();
        ev.prior_had_explanation.reset();
    }
    return history;
}

std::vector<Violation> validate_history(const UserHistory& history) {
    std::vector<Violation> out;
    const auto& events = history.events;
    std::unordered_set<std::int64_t> closed;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const InteractionEvent& e = events[i];
        if (i > 0) {
            const InteractionEvent& p = events[i - 1];
            if (e.timestamp_ms < p.timestamp_ms) {
                out.push_back({i, "timestamp decreases from " + std::to_string(p.timestamp_ms) +
                                      " to " + std::to_string(e.timestamp_ms)});
            }
            if (e.task_container_id != p.task_container_id) {
                closed.insert(p.task_container_id);
                if (closed.count(e.task_container_id)) {
                    out.push_back({i, "container " + std::to_string(e.task_container_id) +
                                          " not contiguous"});
                }
            } else if (e.timestamp_ms != p.timestamp_ms) {
                out.push_back({i, "container " + std::to_string(e.task_container_id) +
                                      " spans timestamps " + std::to_string(p.timestamp_ms) +
                                      " and " + std::to_string(e.timestamp_ms)});
            }
        }
        if (e.content_type == ContentType::Lecture) {
            if (e.user_answer || e.answered_correctly || e.elapsed_time_ms || e.had_explanation) {
                out.push_back({i, "lecture event carries answer/timing fields"});
            }
        } else {
            if (!e.user_answer) out.push_back({i, "question event missing user_answer"});
            if (!e.answered_correctly) out.push_back({i, "question event missing answered_correctly"});
        }
        if (e.user_id != history.user_id) {
            out.push_back({i, "event user_id " + std::to_string(e.user_id) +
                                  " differs from history user_id"});
        }
    }
    return out;
}

std::string canonical_csv_header() {
    std::string h;
    for (const auto& c : kCanonicalColumns) h += (h.empty() ? "" : ",") + c;
    return h;
}

void write_canonical_csv(std::ostream& out, const Histories& histories) {
    out << canonical_csv_header() << "\n";
    for (const auto& [uid, hist] : histories) {
        for (const InteractionEvent& e : hist.events) {
            out << e.row_id << ',' << e.user_id << ',' << e.timestamp_ms << ',' << e.content_id
                << ',' << (e.content_type == ContentType::Question ? 0 : 1) << ','
                << e.task_container_id << ',' << (e.user_answer ? *e.user_answer : -1) << ','
                << (e.answered_correctly ? (*e.answered_correctly ? 1 : 0) : -1) << ','
                << (e.elapsed_time_ms ? *e.elapsed_time_ms : -1) << ','
                << (e.had_explanation ? (*e.had_explanation ? 1 : 0) : -1) << "\n";
        }
    }
}

std::vector<QuestionMeta> parse_questions_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty questions file: missing header row");
    check_header(split_csv_line(line), {"question_id", "correct_answer", "part", "tags"});
    std::vector<QuestionMeta> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4) {
            throw ParseError("row " + std::to_string(row) + ": expected 4 fields, got " +
                             std::to_string(f.size()));
        }
        QuestionMeta q;
        q.question_id = parse_int(f[0], row, "question_id");
        const std::int64_t ans = parse_int(f[1], row, "correct_answer");
        if (ans < 0 || ans > 3) fail(row, "correct_answer", "must be in {0,1,2,3}");
        q.correct_answer = static_cast<int>(ans);
        const std::int64_t part = parse_int(f[2], row, "part");
        if (part < 1 || part > 7) fail(row, "part", "must be in 1..7");
        q.part = static_cast<int>(part);
        std::istringstream tags(f[3]);
        std::string tok;
        while (tags >> tok) q.tags.push_back(static_cast<int>(parse_int(tok, row, "tags")));
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<LectureMeta> parse_lectures_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty lectures file: missing header row");
    check_header(split_csv_line(line), {"lecture_id", "tag", "part", "type_of"});
    std::vector<LectureMeta> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4) {
            throw ParseError("row " + std::to_string(row) + ": expected 4 fields, got " +
                             std::to_string(f.size()));
        }
        LectureMeta l;
        l.lecture_id = parse_int(f[0], row, "lecture_id");
        l.tag = static_cast<int>(parse_int(f[1], row, "tag"));
        const std::int64_t part = parse_int(f[2], row, "part");
        if (part < 1 || part > 7) fail(row, "part", "must be in 1..7");
        l.part = static_cast<int>(part);
        try {
            l.type_of = lecture_type_from_string(f[3]);
        } catch (const std::exception& ex) {
            fail(row, "type_of", ex.what());
        }
        out.push_back(l);
    }
    return out;
}

void write_questions_csv(std::ostream& out, const std::vector<QuestionMeta>& questions) {
    out << "question_id,correct_answer,part,tags\n";
    for (const auto& q : questions) {
        out << q.question_id << ',' << q.correct_answer << ',' << q.part << ',';
        for (std::size_t i = 0; i < q.tags.size(); ++i) out << (i ? " " : "") << q.tags[i];
        out << "\n";
    }
}

void write_lectures_csv(std::ostream& out, const std::vector<LectureMeta>& lectures) {
    out << "lecture_id,tag,part,type_of\n";
    for (const auto& l : lectures) {
        out << l.lecture_id << ',' << l.tag << ',' << l.part << ',' << to_string(l.type_of) << "\n";
    }
}

void ContentCatalog::rebuild_index() {
    question_index.clear();
    lecture_index.clear();
    for (std::size_t i = 0; i < questions.size(); ++i) {
        question_index[questions[i].question_id] = static_cast<int>(i);
    }
    for (std::size_t i = 0; i < lectures.size(); ++i) {
        lecture_index[lectures[i].lecture_id] = static_cast<int>(i);
    }
}

const QuestionMeta& ContentCatalog::question(std::int64_t id) const {
    auto it = question_index.find(id);
    if (it == question_index.end()) {
        throw std::out_of_range("unknown question_id " + std::to_string(id));
    }
    return questions[it->second];
}

const LectureMeta& ContentCatalog::lecture(std::int64_t id) const {
    auto it = lecture_index.find(id);
    if (it == lecture_index.end()) {
        throw std::out_of_range("unknown lecture_id " + std::to_string(id));
    }
    return lectures[it->second];
}

int ContentCatalog::embedding_index(const InteractionEvent& e) const {
    if (e.content_type == ContentType::Question) {
        auto it = question_index.find(e.content_id);
        return it == question_index.end() ? -1 : it->second;
    }
    auto it = lecture_index.find(e.content_id);
    return it == lecture_index.end() ? -1 : static_cast<int>(questions.size()) + it->second;
}

ContentCatalog make_catalog(std::vector<QuestionMeta> questions, std::vector<LectureMeta> lectures,
                            int n_tags) {
    ContentCatalog cat;
    cat.questions = std::move(questions);
    cat.lectures = std::move(lectures);
    cat.rebuild_index();
    if (n_tags >= 0) {
        cat.n_tags = n_tags;
    } else {
        int max_tag = -1;
        for (const auto& q : cat.questions) {
            for (int t : q.tags) max_tag = std::max(max_tag, t);
        }
        for (const auto& l : cat.lectures) max_tag = std::max(max_tag, l.tag);
        cat.n_tags = max_tag + 1;
    }
    return cat;
}

const char* to_string(ContentType t) {
    return t == ContentType::Question ? "question" : "lecture";
}

const char* to_string(LectureType t) {
    switch (t) {
        case LectureType::Concept: return "concept";
        case LectureType::SolvingQuestion: return "solving_question";
        case LectureType::Intention: return "intention";
        case LectureType::Starter: return "starter";
    }
    return "concept";
}

LectureType lecture_type_from_string(const std::string& s) {
    if (s == "concept") return LectureType::Concept;
    if (s == "solving_question") return LectureType::SolvingQuestion;
    if (s == "intention") return LectureType::Intention;
    if (s == "starter") return LectureType::Starter;
    throw std::invalid_argument("unknown lecture type '" + s + "'");
}

}  // namespace kt
