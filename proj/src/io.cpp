#include "covflow/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <system_error>

namespace covflow {

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

CsvBuilder::CsvBuilder(std::vector<std::string> header)
    : columns_(header.size()) {
  if (columns_ == 0) throw std::invalid_argument("CsvBuilder: empty header");
  add_row(std::move(header));
}

void CsvBuilder::add_row(std::vector<std::string> cells) {
  if (cells.size() != columns_)
    throw std::invalid_argument("CsvBuilder: row width mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) text_ += ',';
    text_ += cells[i];
  }
  text_ += '\n';
}

void write_text_atomic(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  fs::path dest(path);
  fs::path tmp = dest;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " +
                                       tmp.string());
    out << text;
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw std::runtime_error("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, dest, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw std::runtime_error("rename failed for " + dest.string() + ": " +
                             ec.message());
  }
}

}  // namespace covflow
