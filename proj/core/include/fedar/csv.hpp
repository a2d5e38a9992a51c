#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace fedar {

/// 17 significant digits ("%.17g"), enough to read back the same double.
std::string format_double(double value);

/// Quotes a field when it holds a comma, quote or line break.
std::string csv_escape(std::string_view field);

/// Header-first RFC 4180 writer with LF line endings.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header);

  void row(const std::vector<std::string>& fields);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_;
};

/// Minimal reader for files produced by CsvWriter: header plus rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace fedar
