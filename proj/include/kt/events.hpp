#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace kt {

enum class ContentType { Question, Lecture };
enum class LectureType { Concept, SolvingQuestion, Intention, Starter };

/// One student interaction. Lectures carry no answer/timing fields.
/// prior_* are staging slots used only by the competition CSV schema, where
/// elapsed time and explanation for a question bundle arrive on the first row
/// of the *following* bundle; adapt_prior_fields shifts them back and clears
/// the staging. Canonical events never carry them.
struct InteractionEvent {
    std::int64_t row_id = 0;
    std::int64_t user_id = 0;
    std::int64_t timestamp_ms = 0;
    std::int64_t content_id = 0;
    ContentType content_type = ContentType::Question;
    std::int64_t task_container_id = 0;
    std::optional<int> user_answer;
    std::optional<bool> answered_correctly;
    std::optional<std::int64_t> elapsed_time_ms;
    std::optional<bool> had_explanation;
    std::optional<std::int64_t> prior_elapsed_time_ms;
    std::optional<bool> prior_had_explanation;

    bool is_question() const { return content_type == ContentType::Question; }
};

struct QuestionMeta {
    std::int64_t question_id = 0;
    int correct_answer = 0;  // 0..3
    int part = 1;            // 1..7
    std::vector<int> tags;   // may be empty, flagged by the empty vector itself
};

struct LectureMeta {
    std::int64_t lecture_id = 0;
    int tag = 0;
    int part = 1;
    LectureType type_of = LectureType::Concept;
};

struct UserHistory {
    std::int64_t user_id = 0;
    std::vector<InteractionEvent> events;
};

using Histories = std::map<std::int64_t, UserHistory>;

/// Question/lecture lookup tables plus derived index ranges.
/// Embedding ids: questions map to [0, n_questions) by table order, lectures
/// to [n_questions, n_questions + n_lectures).
struct ContentCatalog {
    std::vector<QuestionMeta> questions;
    std::vector<LectureMeta> lectures;
    std::unordered_map<std::int64_t, int> question_index;  // question_id -> row in questions
    std::unordered_map<std::int64_t, int> lecture_index;
    int n_tags = 0;

    void rebuild_index();
    int content_rows() const { return static_cast<int>(questions.size() + lectures.size()); }
    const QuestionMeta& question(std::int64_t id) const;
    const LectureMeta& lecture(std::int64_t id) const;
    /// Embedding row for an event, or -1 for unknown content.
    int embedding_index(const InteractionEvent& e) const;
};

enum class CsvSchema { Canonical, CompetitionPrior };

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parse an events CSV. Rows are grouped by user preserving file order.
/// CompetitionPrior input is passed through adapt_prior_fields per user.
Histories parse_events(std::istream& in, CsvSchema schema);

/// Move competition-style prior_question_* staging values back onto the
/// question container they describe. No-op on canonical histories.
UserHistory adapt_prior_fields(UserHistory history);

struct Violation {
    std::size_t position = 0;
    std::string message;
};

/// Check the UserHistory invariants: non-decreasing timestamps, container
/// contiguity, one timestamp per container run, and per-event field presence.
/// Empty result iff valid.
std::vector<Violation> validate_history(const UserHistory& history);

/// Canonical CSV, columns in the documented order, -1 for absent optionals.
void write_canonical_csv(std::ostream& out, const Histories& histories);
std::string canonical_csv_header();

std::vector<QuestionMeta> parse_questions_csv(std::istream& in);
std::vector<LectureMeta> parse_lectures_csv(std::istream& in);
void write_questions_csv(std::ostream& out, const std::vector<QuestionMeta>& questions);
void write_lectures_csv(std::ostream& out, const std::vector<LectureMeta>& lectures);

/// Catalog from metadata tables; n_tags = 1 + max tag id seen (or explicit).
ContentCatalog make_catalog(std::vector<QuestionMeta> questions, std::vector<LectureMeta> lectures,
                            int n_tags = -1);

const char* to_string(ContentType t);
const char* to_string(LectureType t);
LectureType lecture_type_from_string(const std::string& s);

}  // namespace kt
