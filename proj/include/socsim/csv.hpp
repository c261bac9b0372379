#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace socsim::csv {

using Row = std::vector<std::string>;

/// Reads one RFC 4180 record (quoted fields may span lines). Returns nullopt
/// at end of input. `line` is advanced by the number of physical lines read.
std::optional<Row> read_row(std::istream& in, std::size_t& line);

/// Quotes a field when it contains a separator, quote or newline.
std::string escape(const std::string& field);

void write_row(std::ostream& out, const Row& row);

}  // namespace socsim::csv
