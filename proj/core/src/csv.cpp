#include "fedar/csv.hpp"

#include <fmt/format.h>

#include "fedar/errors.hpp"

namespace fedar {

std::string format_double(double value) { return fmt::format("{:.17g}", value); }

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     std::initializer_list<std::string_view> header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
  if (!out_) throw IoError(fmt::format("cannot write {}", path.string()));
  bool first = true;
  for (std::string_view h : header) {
    if (!first) out_ << ',';
    out_ << csv_escape(h);
    first = false;
  }
  out_ << '\n';
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) {
    throw FormatError(fmt::format("{}: row has {} fields, header has {}", path_.string(),
                                  fields.size(), columns_));
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out_ << ',';
    out_ << csv_escape(fields[i]);
  }
  out_ << '\n';
}

void CsvWriter::close() {
  out_.close();
  if (!out_) throw IoError(fmt::format("failed writing {}", path_.string()));
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw FormatError(fmt::format("missing column '{}'", name));
}

namespace {

// Splits one record; quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_record(std::istream& in, bool& ok) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool any = false;
  char ch;
  while (in.get(ch)) {
    any = true;
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      break;
    } else if (ch != '\r') {
      field += ch;
    }
  }
  ok = any;
  if (any) fields.push_back(std::move(field));
  return fields;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  CsvTable table;
  bool ok = false;
  table.header = split_record(in, ok);
  if (!ok) throw FormatError(fmt::format("{}: empty file", path.string()));
  while (true) {
    auto fields = split_record(in, ok);
    if (!ok) break;
    if (fields.size() != table.header.size()) {
      throw FormatError(fmt::format("{}: row {} has {} fields, expected {}", path.string(),
                                    table.rows.size() + 2, fields.size(), table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

}  // namespace fedar
