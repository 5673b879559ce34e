#pragma once
// The strict output contract for every extraction/bridging/judging LLM call:
// one record per line, `FIELD=value | FIELD=value`. Callers get one automatic
// reprompt on a violation, then a typed error.

#include <map>
#include <string>
#include <vector>

#include "prism/providers.hpp"
#include "prism/prompts.hpp"
#include "prism/text.hpp"

namespace prism {

using LineRecord = std::map<std::string, std::string>;

struct LineParseResult {
    bool ok = false;
    std::vector<LineRecord> records;
    std::string error;
};

inline bool is_grammar_key(std::string_view key) {
    if (key.empty()) return false;
    for (unsigned char c : key)
        if (!(std::isupper(c) || std::isdigit(c) || c == '_')) return false;
    return !std::isdigit(static_cast<unsigned char>(key.front()));
}

inline LineParseResult parse_line_records(std::string_view text) {
    LineParseResult result;
    for (const auto& raw : split(text, '\n')) {
        const std::string line = trim(raw);
        if (line.empty()) continue;
        LineRecord record;
        for (const auto& piece : split(line, '|')) {
            const std::string field = trim(piece);
            if (field.empty()) {
                result.error = "empty field in line: " + line;
                return result;
            }
            const auto eq = field.find('=');
            if (eq == std::string::npos) {
                result.error = "field without '=' in line: " + line;
                return result;
            }
            const std::string key = trim(std::string_view(field).substr(0, eq));
            if (!is_grammar_key(key)) {
                result.error = "bad field key '" + key + "' in line: " + line;
                return result;
            }
            record[key] = trim(std::string_view(field).substr(eq + 1));
        }
        if (record.empty()) {
            result.error = "empty record line: " + line;
            return result;
        }
        result.records.push_back(std::move(record));
    }
    if (result.records.empty()) {
        result.error = "no records in response";
        return result;
    }
    result.ok = true;
    return result;
}

// Issues the chat call; on a grammar violation retries once with a REFORMAT
// instruction appended. Returns the parsed records of the first conforming
// response, or the final parse error.
inline LineParseResult chat_line_records(ChatProvider& chat, const ChatRequest& req) {
    ChatResponse first = chat.complete(req);
    LineParseResult parsed = parse_line_records(first.text);
    if (parsed.ok) return parsed;

    ChatRequest retry = req;
    retry.user_prompt += "\n";
    retry.user_prompt += prompts::kReformat;
    retry.user_prompt += prompts::kLineGrammarReminder;
    ChatResponse second = chat.complete(retry);
    return parse_line_records(second.text);
}

} // namespace prism
