// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace vulnrisk::csv {

struct Row {
    std::size_t line = 0;  ///< 1-based physical line where the record starts
    std::vector<std::string> fields;
};

/// RFC 4180 reader: comma-delimited, double-quote quoting with "" escapes,
/// CRLF or LF record terminators, quoted fields may span lines. A leading
/// UTF-8 BOM is skipped. Blank lines are dropped. Throws Error(Schema) on an
/// unterminated quote.
std::vector<Row> parse(std::string_view text);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

/// Joins escaped fields with commas and appends "\n".
std::string format_row(const std::vector<std::string>& fields);

}  // namespace vulnrisk::csv
