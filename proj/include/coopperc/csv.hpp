#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <vector>

namespace coopperc {

// Streaming RFC-4180-style reader: header row, quoted fields (doubled quotes
// escape), CR/LF and LF endings, quoted embedded newlines. The reader holds
// one record at a time; memory use is bounded by the longest record, not the
// file size. Input must be UTF-8.
class CsvReader {
  public:
    explicit CsvReader(std::istream& in);

    const std::vector<std::string>& header() const { return header_; }

    // Reads the next record into `fields` (buffers reused). Returns false at
    // end of input. Throws IngestError on malformed quoting or invalid UTF-8,
    // with the 1-based line number.
    bool next(std::vector<std::string>& fields);

    // 1-based line number where the most recent record started.
    std::size_t record_line() const { return record_line_; }

    // Largest single field seen, bytes. Exposed so tests can verify the
    // bounded-memory property directly.
    std::size_t buffer_high_water() const { return high_water_; }

  private:
    bool read_record(std::vector<std::string>& fields);

    std::istream& in_;
    std::vector<std::string> header_;
    std::size_t line_ = 1;         // current physical line
    std::size_t record_line_ = 1;  // line where the last record started
    std::size_t high_water_ = 0;
};

// Index of `name` in the header; throws IngestError naming the column when
// missing.
std::size_t column_index(const std::vector<std::string>& header, const std::string& name);

// Parses a decimal field; throws IngestError with the line number on failure.
double parse_double_field(const std::string& field, const std::string& column, std::size_t line);

}  // namespace coopperc
