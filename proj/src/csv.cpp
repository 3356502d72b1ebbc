#include "cutwalk/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

#include "cutwalk/errors.hpp"

namespace cutwalk {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("format_double: to_chars failed");
  return std::string(buf, ptr);
}

std::string format_int(std::int64_t v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("format_int: to_chars failed");
  return std::string(buf, ptr);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path dir = path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("atomic rename failed: " + path.string() + " (" + ec.message() + ")");
}

CsvBuilder& CsvBuilder::field(const std::string& s) {
  if (row_open_) buf_ += ',';
  buf_ += s;
  row_open_ = true;
  return *this;
}

CsvBuilder& CsvBuilder::end_row() {
  buf_ += '\n';
  row_open_ = false;
  return *this;
}

}  // namespace cutwalk
