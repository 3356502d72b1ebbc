#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace cutwalk {

// Shortest round-trip decimal form (to_chars); '.' decimal point always.
std::string format_double(double v);
std::string format_int(std::int64_t v);

// Atomic write: temp file in the target directory, then rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Minimal row builder for CSV artifacts.
class CsvBuilder {
 public:
  explicit CsvBuilder(std::string header) : buf_(std::move(header)) { buf_ += '\n'; }

  CsvBuilder& field(const std::string& s);
  CsvBuilder& field(double v) { return field(format_double(v)); }
  CsvBuilder& field(std::int64_t v) { return field(format_int(v)); }
  CsvBuilder& end_row();

  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
  bool row_open_ = false;
};

}  // namespace cutwalk
