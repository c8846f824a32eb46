#include "dmot/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dmot/errors.hpp"

namespace dmot {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int CsvTable::column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    throw LogError("csv table has no column '" + name + "'");
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    std::ofstream out(path);
    if (!out) throw LogError("cannot open " + path.string() + " for writing");
    for (size_t i = 0; i < table.header.size(); ++i) {
        if (i) out << ',';
        out << table.header[i];
    }
    out << '\n';
    for (const auto& row : table.rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    }
    if (!out) throw LogError("failed while writing " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LogError("cannot open " + path.string());
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (!line.empty() && line.back() == ',') fields.emplace_back();
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            if (fields.size() != table.header.size()) {
                throw LogError(path.string() + ": row " + std::to_string(table.rows.size() + 2) +
                               " has " + std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(table.header.size()));
            }
            table.rows.push_back(std::move(fields));
        }
    }
    if (first) throw LogError(path.string() + ": empty table");
    return table;
}

double parse_double(const std::string& s) {
    if (s.empty()) throw LogError("empty numeric field");
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (errno != 0 || end == s.c_str() || *end != '\0') {
        throw LogError("bad numeric field '" + s + "'");
    }
    return v;
}

int64_t parse_int(const std::string& s) {
    if (s.empty()) throw LogError("empty integer field");
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (errno != 0 || end == s.c_str() || *end != '\0') {
        throw LogError("bad integer field '" + s + "'");
    }
    return static_cast<int64_t>(v);
}

}  // namespace dmot
