#include "coopperc/csv.hpp"

#include <charconv>
#include <cstdint>

#include "coopperc/error.hpp"

namespace coopperc {

namespace {

// Validates one UTF-8 sequence starting at byte c0; returns the number of
// continuation bytes still expected.
int utf8_expected_continuations(unsigned char c0, std::size_t line) {
    if (c0 < 0x80) return 0;
    if ((c0 & 0xE0) == 0xC0) return 1;
    if ((c0 & 0xF0) == 0xE0) return 2;
    if ((c0 & 0xF8) == 0xF0) return 3;
    throw IngestError("invalid UTF-8 byte in input", line);
}

}  // namespace

CsvReader::CsvReader(std::istream& in) : in_(in) {
    std::vector<std::string> fields;
    if (read_record(fields)) {
        header_ = fields;
    }
}

bool CsvReader::next(std::vector<std::string>& fields) { return read_record(fields); }

bool CsvReader::read_record(std::vector<std::string>& fields) {
    std::streambuf* buf = in_.rdbuf();
    int c = buf->sgetc();
    if (c == std::streambuf::traits_type::eof()) return false;

    record_line_ = line_;
    fields.clear();
    std::string field;
    bool in_quotes = false;
    int pending_continuations = 0;

    auto finish_field = [&] {
        high_water_ = std::max(high_water_, field.size());
        fields.push_back(field);
        field.clear();
    };

    for (;;) {
        c = buf->sbumpc();
        if (c == std::streambuf::traits_type::eof()) {
            if (in_quotes) throw IngestError("unterminated quoted field", record_line_);
            if (pending_continuations) throw IngestError("truncated UTF-8 sequence", line_);
            finish_field();
            return true;
        }
        auto ch = static_cast<unsigned char>(c);

        if (pending_continuations > 0) {
            if ((ch & 0xC0) != 0x80) throw IngestError("invalid UTF-8 continuation", line_);
            --pending_continuations;
            field.push_back(static_cast<char>(ch));
            continue;
        }

        if (ch == '\r') {
            if (in_quotes) {
                field.push_back('\r');
            } else if (buf->sgetc() == '\n') {
                buf->sbumpc();
                ++line_;
                finish_field();
                return true;
            } else {
                ++line_;
                finish_field();
                return true;
            }
            continue;
        }
        if (ch == '\n') {
            ++line_;
            if (in_quotes) {
                field.push_back('\n');
            } else {
                finish_field();
                return true;
            }
            continue;
        }
        if (ch == '"') {
            if (!in_quotes && field.empty()) {
                in_quotes = true;
            } else if (in_quotes) {
                if (buf->sgetc() == '"') {
                    buf->sbumpc();
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                throw IngestError("stray quote inside unquoted field", line_);
            }
            continue;
        }
        if (ch == ',' && !in_quotes) {
            finish_field();
            continue;
        }
        pending_continuations = utf8_expected_continuations(ch, line_);
        field.push_back(static_cast<char>(ch));
    }
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw IngestError("missing column '" + name + "' in header", 1);
}

double parse_double_field(const std::string& field, const std::string& column, std::size_t line) {
    const char* first = field.data();
    const char* last = first + field.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (last[-1] == ' ' || last[-1] == '\t')) --last;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || first == last) {
        throw IngestError("cannot parse number in column '" + column + "'", line);
    }
    return value;
}

}  // namespace coopperc
