#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace evgrid {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const; // -1 if absent
};

/// Reads a CSV file. Lines starting with '#' are skipped. Quoted fields with
/// embedded commas/quotes are handled; embedded newlines are not.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text, const std::string& context);

/// Shortest round-trip decimal representation (std::to_chars), so reruns are
/// byte-identical.
std::string fmt_double(double v);

class CsvWriter {
  public:
    explicit CsvWriter(const std::filesystem::path& path);

    void row(const std::vector<std::string>& fields);
    void comment(const std::string& text);

  private:
    std::ofstream out_;
};

} // namespace evgrid
