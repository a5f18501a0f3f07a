#include "maestro/protocol.hpp"

#include <array>
#include <cassert>

#include "maestro/errors.hpp"
#include "maestro/registry.hpp"
#include "maestro/text.hpp"

namespace maestro::protocol {

namespace {

struct TagSpec {
    SegmentKind kind;
    std::string_view open;
    std::string_view close;
};

constexpr std::array<TagSpec, 4> kTags{{
    {SegmentKind::Think, "<think>", "</think>"},
    {SegmentKind::Search, "<search>", "</search>"},
    {SegmentKind::Information, "<information>", "</information>"},
    {SegmentKind::Answer, "<answer>", "</answer>"},
}};

// True when position i holds an unescaped '<' (even number of preceding
// backslashes).
bool unescaped_open(std::string_view s, std::size_t i) {
    if (s[i] != '<') return false;
    std::size_t backslashes = 0;
    while (i > backslashes && s[i - 1 - backslashes] == '\\') ++backslashes;
    return backslashes % 2 == 0;
}

// Finds the next unescaped tag (open or close) at or after `from`.
struct TagHit {
    std::size_t pos;
    int tag_index;  // into kTags
    bool is_close;
};

std::optional<TagHit> next_tag(std::string_view s, std::size_t from) {
    for (std::size_t i = from; i < s.size(); ++i) {
        if (!unescaped_open(s, i)) continue;
        std::string_view rest = s.substr(i);
        for (int t = 0; t < static_cast<int>(kTags.size()); ++t) {
            if (rest.starts_with(kTags[t].open)) return TagHit{i, t, false};
            if (rest.starts_with(kTags[t].close)) return TagHit{i, t, true};
        }
    }
    return std::nullopt;
}

void check_identifier(std::string_view id) {
    if (id.empty()) {
        throw Error(ErrorCode::InvalidIdentifier, "empty identifier");
    }
    for (char c : id) {
        // '@' and ':' delimit the payload; brackets and backslash belong to
        // the tag syntax; whitespace would not survive the tolerant parse.
        if (c == '@' || c == ':' || c == '<' || c == '>' || c == '\\' || text::is_space(c)) {
            throw Error(ErrorCode::InvalidIdentifier,
                        "identifier contains a reserved character: " + std::string(id));
        }
    }
}

// Splits a raw search payload into (model, skill, query). Whitespace around
// the identifiers and the query is tolerated.
std::optional<SearchAction> split_search_payload(std::string_view payload) {
    auto at = payload.find("@@");
    if (at == std::string_view::npos) return std::nullopt;
    auto colon = payload.find(':', at + 2);
    if (colon == std::string_view::npos) return std::nullopt;
    SearchAction action;
    action.model_id = std::string(text::trim(payload.substr(0, at)));
    action.skill_id = std::string(text::trim(payload.substr(at + 2, colon - at - 2)));
    action.query = std::string(text::trim(payload.substr(colon + 1)));
    if (action.model_id.empty() || action.skill_id.empty()) return std::nullopt;
    return action;
}

} // namespace

std::string escape_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '\\' || c == '<' || c == '>') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

std::string unescape_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size() &&
            (s[i + 1] == '\\' || s[i + 1] == '<' || s[i + 1] == '>')) {
            out.push_back(s[i + 1]);
            ++i;
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

std::string serialize_search(std::string_view model_id, std::string_view skill_id,
                             std::string_view query) {
    check_identifier(model_id);
    check_identifier(skill_id);
    for (const auto& tag : kTags) {
        if (query.find(tag.open) != std::string_view::npos ||
            query.find(tag.close) != std::string_view::npos) {
            throw Error(ErrorCode::InvalidIdentifier, "query contains a protocol tag");
        }
    }
    std::string out;
    out.reserve(query.size() + model_id.size() + skill_id.size() + 24);
    out += "<search>";
    out += model_id;
    out += "@@";
    out += skill_id;
    out += ": ";
    out += query;
    out += "</search>";
    return out;
}

std::string wrap_observation(std::string_view obs) {
    return "<information>" + escape_text(obs) + "</information>";
}

std::string wrap_think(std::string_view thought) {
    return "<think>" + escape_text(thought) + "</think>";
}

std::string wrap_answer(std::string_view answer) {
    return "<answer>" + escape_text(answer) + "</answer>";
}

const Step* ParsedTrajectory::answer_step() const {
    for (const auto& step : steps) {
        if (step.is_answer()) return &step;
    }
    return nullptr;
}

std::optional<std::string> ParsedTrajectory::final_answer() const {
    if (const Step* step = answer_step()) {
        return std::get<AnswerAction>(*step->action).text;
    }
    return std::nullopt;
}

ParsedTrajectory parse_trajectory(std::string_view raw) {
    ParsedTrajectory pt;
    pt.raw = std::string(raw);

    auto add_violation = [&](Constraint c, std::size_t offset, std::string detail) {
        pt.parse_violations.push_back(Violation{c, offset, std::move(detail)});
    };

    std::size_t pos = 0;
    while (pos < raw.size()) {
        auto hit = next_tag(raw, pos);
        if (!hit) {
            auto residue = raw.substr(pos);
            if (!text::trim(residue).empty()) {
                pt.segments.push_back(Segment{SegmentKind::Residue, std::string(residue),
                                              std::nullopt, pos, raw.size(), true});
                add_violation(Constraint::BalancedTags, pos, "text outside protocol blocks");
            }
            break;
        }
        if (hit->pos > pos) {
            auto residue = raw.substr(pos, hit->pos - pos);
            if (!text::trim(residue).empty()) {
                pt.segments.push_back(Segment{SegmentKind::Residue, std::string(residue),
                                              std::nullopt, pos, hit->pos, true});
                add_violation(Constraint::BalancedTags, pos, "text outside protocol blocks");
            }
        }
        if (hit->is_close) {
            // A close tag with no matching open.
            add_violation(Constraint::BalancedTags, hit->pos,
                          "unmatched close tag " + std::string(kTags[hit->tag_index].close));
            pos = hit->pos + kTags[hit->tag_index].close.size();
            continue;
        }

        const TagSpec& tag = kTags[hit->tag_index];
        std::size_t content_start = hit->pos + tag.open.size();
        auto inner = next_tag(raw, content_start);

        Segment seg;
        seg.kind = tag.kind;
        seg.offset = hit->pos;

        std::size_t content_end;
        if (inner && inner->is_close && inner->tag_index == hit->tag_index) {
            content_end = inner->pos;
            seg.closed = true;
            pos = inner->pos + tag.close.size();
        } else {
            // The next tag is not our close tag (or there is none): the block
            // is unterminated. Recover at the interrupting tag.
            content_end = inner ? inner->pos : raw.size();
            seg.closed = false;
            pos = content_end;
            add_violation(Constraint::BalancedTags, hit->pos,
                          "unterminated " + std::string(tag.open) + " block");
        }

        seg.end = pos;
        std::string_view content = raw.substr(content_start, content_end - content_start);
        if (tag.kind == SegmentKind::Search) {
            seg.text = std::string(content);
            seg.search = split_search_payload(content);
        } else {
            seg.text = unescape_text(content);
        }
        pt.segments.push_back(std::move(seg));
    }

    // Group segments into steps: accumulated thinks attach to the next action;
    // information blocks attach to the step of the preceding action.
    Step current;
    bool current_open = false;
    auto flush = [&]() {
        if (current_open) {
            pt.steps.push_back(std::move(current));
            current = Step{};
            current_open = false;
        }
    };
    bool after_action = false; // current step already has its action
    for (const auto& seg : pt.segments) {
        switch (seg.kind) {
        case SegmentKind::Think:
            if (after_action) {
                flush();
                after_action = false;
            }
            current.thinks.push_back(seg.text);
            current_open = true;
            break;
        case SegmentKind::Search:
            if (after_action) {
                flush();
            }
            current.action = seg.search
                                 ? Action(*seg.search)
                                 : Action(SearchAction{"", "", seg.text});
            current_open = true;
            after_action = true;
            break;
        case SegmentKind::Answer:
            if (after_action) {
                flush();
            }
            current.action = AnswerAction{seg.text};
            current_open = true;
            after_action = true;
            break;
        case SegmentKind::Information:
            // Attaches to the open step; an orphan observation opens one.
            current.observations.push_back(seg.text);
            current_open = true;
            break;
        case SegmentKind::Residue:
            break;
        }
    }
    flush();

    // Terminal iff there is exactly one answer segment, it is closed, and only
    // whitespace (or nothing) follows it in the raw text.
    std::size_t answer_count = 0;
    const Segment* last_answer = nullptr;
    for (const auto& seg : pt.segments) {
        if (seg.kind == SegmentKind::Answer) {
            ++answer_count;
            last_answer = &seg;
        }
    }
    if (answer_count == 1 && last_answer->closed) {
        std::string_view tail = std::string_view(pt.raw).substr(last_answer->end);
        pt.terminal = text::trim(tail).empty();
    }
    return pt;
}

FormatReport validate_format(const ParsedTrajectory& pt, const registry::Registry& reg) {
    FormatReport report;
    auto flag = [&](Constraint c, bool& field, std::size_t offset, std::string detail) {
        field = false;
        report.violations.push_back(Violation{c, offset, std::move(detail)});
    };

    // (1) Balanced tags / structural integrity, surfaced by the parser.
    for (const auto& v : pt.parse_violations) {
        if (v.constraint == Constraint::BalancedTags) {
            flag(Constraint::BalancedTags, report.balanced_tags, v.offset, v.detail);
        }
    }

    // (2) Exactly one think block per step, the trailing actionless group
    // included (a lone dangling think is tolerated there; extra ones are not).
    for (std::size_t i = 0; i < pt.steps.size(); ++i) {
        const Step& step = pt.steps[i];
        std::size_t n = step.thinks.size();
        if (step.action ? n != 1 : n > 1) {
            flag(Constraint::OneThinkPerStep, report.one_think_per_step, 0,
                 "step " + std::to_string(i) + " has " + std::to_string(n) + " think blocks");
        }
    }

    // (3) #<search> == #<information>.
    std::size_t searches = 0, infos = 0;
    for (const auto& seg : pt.segments) {
        if (seg.kind == SegmentKind::Search) ++searches;
        if (seg.kind == SegmentKind::Information) ++infos;
    }
    if (searches != infos) {
        flag(Constraint::SearchInfoCountsMatch, report.search_info_counts_match, 0,
             std::to_string(searches) + " search vs " + std::to_string(infos) +
                 " information blocks");
    }

    // (4) Identifiers resolve against the registry (Level-1 skill names).
    for (const auto& seg : pt.segments) {
        if (seg.kind != SegmentKind::Search) continue;
        if (!seg.search) {
            flag(Constraint::IdentifiersValid, report.identifiers_valid, seg.offset,
                 "search payload is not Model@@Skill: query");
            continue;
        }
        if (!reg.find_model(seg.search->model_id)) {
            flag(Constraint::IdentifiersValid, report.identifiers_valid, seg.offset,
                 "unknown model " + seg.search->model_id);
        }
        if (!reg.find_skill(seg.search->skill_id)) {
            flag(Constraint::IdentifiersValid, report.identifiers_valid, seg.offset,
                 "unknown skill " + seg.search->skill_id);
        }
    }

    // (5) Exactly one terminal answer block.
    if (!pt.terminal) {
        std::size_t answers = 0;
        for (const auto& seg : pt.segments) {
            if (seg.kind == SegmentKind::Answer) ++answers;
        }
        flag(Constraint::SingleTerminalAnswer, report.single_terminal_answer, 0,
             answers == 0 ? "no answer block"
                          : (answers > 1 ? "multiple answer blocks" : "answer block not terminal"));
    }
    return report;
}

std::string truncate_observation(std::string_view obs, std::size_t limit) {
    auto tokens = text::tokenize(obs);
    if (tokens.size() <= limit) return std::string(obs);
    std::string out;
    for (std::size_t i = 0; i < limit; ++i) {
        out += tokens[i];
        out.push_back(' ');
    }
    out += kTruncationMarker;
    return out;
}

std::string serialize_trajectory(const ParsedTrajectory& pt) {
    std::string out;
    for (const auto& step : pt.steps) {
        for (const auto& think : step.thinks) out += wrap_think(think);
        if (step.is_search()) {
            const auto& s = std::get<SearchAction>(*step.action);
            out += serialize_search(s.model_id, s.skill_id, s.query);
        }
        for (const auto& obs : step.observations) out += wrap_observation(obs);
        if (step.is_answer()) {
            out += wrap_answer(std::get<AnswerAction>(*step.action).text);
        }
    }
    return out;
}

} // namespace maestro::protocol
