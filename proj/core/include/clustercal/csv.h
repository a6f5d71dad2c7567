#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace clustercal {

// Parsed comma-separated file with a mandatory header row. Quoted fields
// ("a,b", "say ""hi""") are supported; values are kept as raw strings.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of `name` in the header, or -1.
  int column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

// Parses a complete numeric cell; returns false on trailing garbage or empty input.
bool parse_double(std::string_view text, double& out);

std::string_view trim(std::string_view text);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  CsvWriter& add(std::string value);
  CsvWriter& add(double value);
  CsvWriter& add(long long value);
  CsvWriter& add(std::size_t value) { return add(static_cast<long long>(value)); }
  CsvWriter& add(int value) { return add(static_cast<long long>(value)); }
  void end_row();

  const std::string& str() const { return out_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::size_t columns_;
  std::size_t pending_ = 0;
  std::string out_;
};

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace clustercal
