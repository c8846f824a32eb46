#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dmot {

/// Lossless, locale-independent double formatting (%.17g round-trips IEEE
/// doubles exactly, keeping logs byte-stable across reruns).
std::string format_double(double v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // throws LogError when missing
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Reads a whole CSV file; throws LogError naming the file on missing or
/// malformed input (ragged rows included).
CsvTable read_csv(const std::filesystem::path& path);

double parse_double(const std::string& s);
int64_t parse_int(const std::string& s);

}  // namespace dmot
