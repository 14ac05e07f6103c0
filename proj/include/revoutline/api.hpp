#pragma once

// JSON shapes shared by the HTTP server and the CLI, so both emit identical bytes.

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "revoutline/docstate.hpp"
#include "revoutline/merge.hpp"
#include "revoutline/textseg.hpp"

namespace revoutline::api {

using Json = nlohmann::ordered_json;

inline Json card_entry(const Card& card) {
    Json j = Json::object();
    switch (card.level) {
    case LevelKind::original:
        j["text"] = card.text;
        break;
    case LevelKind::central:
    case LevelKind::extractive:
        j["summary"] = card.text;
        j["sentence_indices"] = card.sentence_indices;
        break;
    case LevelKind::abstractive:
        j["summary"] = card.text;
        j["source"] = to_string(card.source.value_or(AbstractiveSource::fallback));
        break;
    case LevelKind::keywords:
        j["keywords"] = card.keywords;
        break;
    }
    return j;
}

// {"0": card, "1": card, ...}: one key per paragraph, in paragraph order.
inline Json card_envelope(const std::vector<Card>& cards) {
    Json j = Json::object();
    for (std::size_t i = 0; i < cards.size(); ++i) j[std::to_string(i)] = card_entry(cards[i]);
    return j;
}

inline Json sentence_refs(const std::vector<SentenceRef>& refs) {
    Json out = Json::array();
    for (const auto& r : refs) out.push_back(Json::array({to_string(r.paragraph), r.sentence}));
    return out;
}

inline Json merge_body(const MergeSuggestion& suggestion) {
    Json j;
    j["merged"] = suggestion.merged_text;
    j["retained"] = sentence_refs(suggestion.retained);
    j["cut"] = sentence_refs(suggestion.cut);
    return j;
}

inline Json error_body(std::string_view code, std::string_view message) {
    Json inner;
    inner["code"] = code;
    inner["message"] = message;
    Json j;
    j["error"] = std::move(inner);
    return j;
}

// "¶<index>\t<card text>" with line breaks inside the card folded to spaces.
inline std::string text_line(std::size_t index, const Card& card) {
    std::string text = card.text;
    for (char& c : text)
        if (c == '\n' || c == '\r') c = ' ';
    return "¶" + std::to_string(index) + "\t" + text;
}

// Each string is taken as one paragraph as-is (no further blank-line splitting).
inline std::vector<Paragraph> paragraphs_from_strings(const std::vector<std::string>& texts,
                                                      const AbbreviationList& abbreviations = AbbreviationList::builtin()) {
    std::vector<Paragraph> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) out.push_back(make_paragraph(texts[i], i, abbreviations));
    return out;
}

inline std::vector<std::string> paragraph_texts(const std::vector<Paragraph>& paragraphs) {
    std::vector<std::string> out;
    out.reserve(paragraphs.size());
    for (const auto& p : paragraphs) out.push_back(p.text);
    return out;
}

} // namespace revoutline::api
