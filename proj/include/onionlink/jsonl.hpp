#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace onionlink {

// ordered_json keeps object fields in insertion order so emitted records
// are byte-stable across runs.
using json = nlohmann::ordered_json;

// Calls fn(line_number, line) for every line of the file (1-based numbers,
// trailing '\n' stripped, blank lines skipped). Throws InputError if the
// file cannot be opened.
void for_each_line(const std::string& path,
                   const std::function<void(size_t, std::string_view)>& fn);

// Parses one JSONL record; wraps syntax errors in InputError mentioning
// the source location as "<context>:<line_no>".
json parse_json_line(std::string_view line, const std::string& context, size_t line_no);

// Whole-file helpers. Writers are atomic-ish: write to path + ".tmp" then rename.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

// True if `s` is valid UTF-8; on failure sets byte_offset to the first bad byte.
bool validate_utf8(std::string_view s, size_t* byte_offset);

// Quotes a CSV field when it contains a comma, quote, or newline.
std::string csv_field(std::string_view s);

} // namespace onionlink
