#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace maestro::registry {
struct Registry;
}

namespace maestro::protocol {

// Tagged wire format carrying all agent-environment traffic:
//   <think>...</think>
//   <search>Model@@Skill: query</search>
//   <information>...</information>
//   <answer>...</answer>
//
// Literal angle brackets and backslashes inside think/information/answer
// content are escaped ("\<", "\>", "\\") so tag balance stays decidable no
// matter what an expert returns. Search payloads are never escaped; their
// identifiers and query must be tag-free, enforced at serialization time.

inline constexpr std::string_view kTruncationMarker = "[TRUNCATED]";

struct SearchAction {
    std::string model_id;
    std::string skill_id;
    std::string query;

    bool operator==(const SearchAction&) const = default;
};

struct AnswerAction {
    std::string text;

    bool operator==(const AnswerAction&) const = default;
};

using Action = std::variant<SearchAction, AnswerAction>;

// The five protocol constraints checked by validate_format.
enum class Constraint {
    BalancedTags = 1,
    OneThinkPerStep = 2,
    SearchInfoCountsMatch = 3,
    IdentifiersValid = 4,
    SingleTerminalAnswer = 5,
};

struct Violation {
    Constraint constraint;
    std::size_t offset; // character offset into the raw trace
    std::string detail;
};

enum class SegmentKind { Think, Search, Information, Answer, Residue };

struct Segment {
    SegmentKind kind;
    std::string text; // unescaped content; raw payload for Search; raw text for Residue
    std::optional<SearchAction> search; // set when kind == Search and the payload splits
    std::size_t offset = 0;             // offset of the opening tag (or residue start)
    std::size_t end = 0;                // one past the close tag (or the recovery point)
    bool closed = true;                 // matching close tag was found
};

// One reasoning step: think block(s) followed by a search (with its injected
// observations) or the terminal answer. Malformed traces may yield steps with
// zero or multiple thinks, or no action at all; the validator reports those.
struct Step {
    std::vector<std::string> thinks;
    std::optional<Action> action;
    std::vector<std::string> observations;

    bool is_search() const { return action && std::holds_alternative<SearchAction>(*action); }
    bool is_answer() const { return action && std::holds_alternative<AnswerAction>(*action); }
};

struct ParsedTrajectory {
    std::string raw;
    std::vector<Segment> segments;
    std::vector<Step> steps;
    bool terminal = false; // exactly one answer block and nothing but whitespace after it

    // Structural anomalies discovered while parsing (imbalance, stray text).
    // validate_format folds these into its report; the parser never aborts.
    std::vector<Violation> parse_violations;

    const Step* answer_step() const;
    std::optional<std::string> final_answer() const;
};

struct FormatReport {
    bool balanced_tags = true;
    bool one_think_per_step = true;
    bool search_info_counts_match = true;
    bool identifiers_valid = true;
    bool single_terminal_answer = true;
    std::vector<Violation> violations;

    bool clean() const {
        return balanced_tags && one_think_per_step && search_info_counts_match &&
               identifiers_valid && single_terminal_answer;
    }
};

// Escaping for block content. Total and bijective.
std::string escape_text(std::string_view s);
std::string unescape_text(std::string_view s);

// Wire-form emitters.
std::string serialize_search(std::string_view model_id, std::string_view skill_id,
                             std::string_view query);
std::string wrap_observation(std::string_view obs);
std::string wrap_think(std::string_view thought);
std::string wrap_answer(std::string_view answer);

// Best-effort structural parse of arbitrary text. Deterministic, never throws;
// unrecognized or unbalanced regions become parse_violations, not data loss.
ParsedTrajectory parse_trajectory(std::string_view raw);

// Evaluates the five protocol constraints against a parse. Reports every
// violation, not just the first.
FormatReport validate_format(const ParsedTrajectory& pt, const registry::Registry& reg);

// First `limit` whitespace tokens of obs, with a fixed marker appended when
// anything was dropped. Under-limit input is returned unchanged.
std::string truncate_observation(std::string_view obs, std::size_t limit);

// Canonical re-serialization of a parse (block concatenation, no separators).
// For well-formed input, serialize_trajectory(parse_trajectory(t)) is the
// normal form of t.
std::string serialize_trajectory(const ParsedTrajectory& pt);

} // namespace maestro::protocol
