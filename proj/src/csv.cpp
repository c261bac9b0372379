#include "socsim/csv.hpp"

#include "socsim/errors.hpp"

namespace socsim::csv {

std::optional<Row> read_row(std::istream& in, std::size_t& line) {
  if (in.peek() == std::char_traits<char>::eof()) return std::nullopt;
  Row row;
  std::string field;
  bool quoted = false;
  bool field_was_quoted = false;
  const std::size_t start_line = line + 1;
  ++line;
  char c;
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty() && !field_was_quoted) {
      quoted = true;
      field_was_quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      field_was_quoted = false;
    } else if (c == '\r') {
      // tolerate CRLF
    } else if (c == '\n') {
      row.push_back(std::move(field));
      return row;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw DataError("unterminated quoted field", start_line);
  row.push_back(std::move(field));
  return row;
}

std::string escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << escape(row[i]);
  }
  out << '\n';
}

}  // namespace socsim::csv
