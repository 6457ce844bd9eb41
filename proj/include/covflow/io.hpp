#pragma once

#include <string>
#include <vector>

namespace covflow {

/// Shortest round-trip-exact decimal form (printf %.17g).
std::string format_double(double x);

/// Minimal CSV builder: comma-separated, LF line endings, header first.
class CsvBuilder {
 public:
  explicit CsvBuilder(std::vector<std::string> header);

  void add_row(std::vector<std::string> cells);
  const std::string& text() const { return text_; }

 private:
  std::size_t columns_;
  std::string text_;
};

/// Writes to a temporary file in the target directory, then renames over
/// the destination: a failed run never leaves a partial artifact behind.
void write_text_atomic(const std::string& path, const std::string& text);

}  // namespace covflow
