#pragma once

#include <string>
#include <vector>

#include "cesmark/types.hpp"

namespace cesmark {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;             // -1 when absent
    int require_column(const std::string& name) const;     // throws ConfigError
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Shortest round-trip decimal form; deterministic across runs.
std::string format_double(double v);

/// Parse helpers with row-numbered diagnostics.
double parse_double(const std::string& cell, const std::string& column, int row);
int parse_int(const std::string& cell, const std::string& column, int row);

}  // namespace cesmark
