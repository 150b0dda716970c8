#include "injuryrisk/csv.hpp"

#include "injuryrisk/common.hpp"

namespace injuryrisk::csv {

Reader::Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw DataError("cannot open " + path.string());
}

std::optional<Row> Reader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    return split_line(line);
  }
  return std::nullopt;
}

Row split_line(std::string_view line) {
  Row out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string join(const Row& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    out += escape(row[i]);
  }
  return out;
}

Table read_table(const std::filesystem::path& path) {
  Reader reader(path);
  Table table;
  auto header = reader.next();
  if (!header) throw DataError(path.string() + ": empty file (missing header)");
  table.header = std::move(*header);
  while (auto row = reader.next()) {
    if (row->size() != table.header.size()) {
      throw DataError(path.string() + ":" + std::to_string(reader.line()) + ": expected " +
                      std::to_string(table.header.size()) + " fields, got " + std::to_string(row->size()));
    }
    table.rows.push_back(std::move(*row));
  }
  return table;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace injuryrisk::csv
