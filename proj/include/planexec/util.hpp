#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>

namespace planexec::util {

/// Current wall-clock time as Unix epoch seconds.
std::int64_t now_unix();

/// "YYYY-MM-DDTHH:MM:SSZ" for a Unix timestamp (UTC).
std::string iso8601_utc(std::int64_t unix_seconds);

/// fixed when provided (reproducible pipelines), otherwise now_unix().
std::int64_t effective_time(const std::optional<std::int64_t>& fixed);

/// Whole-file helpers. read_file throws IoError when the file cannot be
/// opened; write_file creates parent directories and throws IoError on
/// failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// Line-oriented writer for streamed output files. A failed write
/// appends a "#PARTIAL" marker line (best effort) and throws IoError,
/// so a truncated file can never be mistaken for a complete one.
class LineWriter {
 public:
  explicit LineWriter(const std::string& path);
  void line(const std::string& text);

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace planexec::util
