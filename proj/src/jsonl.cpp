#include "onionlink/jsonl.hpp"

#include "onionlink/errors.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace onionlink {

void for_each_line(const std::string& path,
                   const std::function<void(size_t, std::string_view)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        fn(line_no, line);
    }
    if (in.bad()) throw InputError("read error on file: " + path);
}

json parse_json_line(std::string_view line, const std::string& context, size_t line_no) {
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded())
        throw InputError(context + ":" + std::to_string(line_no) + ": malformed JSON record");
    return j;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw InputError("read error on file: " + path);
    return ss.str();
}

void write_text_file(const std::string& path, std::string_view content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot open file for writing: " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw InputError("write error on file: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw InputError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

bool validate_utf8(std::string_view s, size_t* byte_offset) {
    size_t i = 0;
    const size_t n = s.size();
    while (i < n) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        size_t need;
        uint32_t cp, min_cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xe0) == 0xc0) {
            need = 1; cp = c & 0x1f; min_cp = 0x80;
        } else if ((c & 0xf0) == 0xe0) {
            need = 2; cp = c & 0x0f; min_cp = 0x800;
        } else if ((c & 0xf8) == 0xf0) {
            need = 3; cp = c & 0x07; min_cp = 0x10000;
        } else {
            if (byte_offset) *byte_offset = i;
            return false;
        }
        if (i + need >= n) { // not enough continuation bytes left
            if (byte_offset) *byte_offset = i;
            return false;
        }
        for (size_t k = 1; k <= need; ++k) {
            unsigned char cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xc0) != 0x80) {
                if (byte_offset) *byte_offset = i;
                return false;
            }
            cp = (cp << 6) | (cc & 0x3f);
        }
        // reject overlong encodings, surrogates, and values past U+10FFFF
        if (cp < min_cp || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) {
            if (byte_offset) *byte_offset = i;
            return false;
        }
        i += need + 1;
    }
    return true;
}

} // namespace onionlink
