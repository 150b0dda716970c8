#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace injuryrisk::csv {

using Row = std::vector<std::string>;

/// Streaming RFC-4180 reader (quoted fields, doubled quotes, CRLF tolerated).
/// Quoted fields may not span lines.
class Reader {
 public:
  explicit Reader(const std::filesystem::path& path);

  /// Next record, or nullopt at end of file.
  std::optional<Row> next();
  /// 1-based line number of the record last returned by next().
  std::size_t line() const noexcept { return line_; }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_ = 0;
};

Row split_line(std::string_view line);

/// Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);
std::string join(const Row& row);

/// Reads a whole file; first row is the header.
struct Table {
  Row header;
  std::vector<Row> rows;
};
Table read_table(const std::filesystem::path& path);

/// Writes to `path` atomically enough for our purposes (temp + rename).
void write_text(const std::filesystem::path& path, const std::string& content);

}  // namespace injuryrisk::csv
