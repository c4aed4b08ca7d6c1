#pragma once

// CSV tables with the versioned header comment
//
//   # kml-csv v1 experiment=<name>
//   col1,col2,...
//
// Numbers are written with round-trip precision.

#include "kml/error.hpp"
#include "kml/format.hpp"

#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace kml {

using Cell = std::variant<double, long long, std::string, bool>;

struct Table {
    std::string experiment;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row)
    {
        if (row.size() != columns.size()) throw invalid_argument("table row has the wrong number of cells");
        rows.push_back(std::move(row));
    }
};

inline std::string cell_text(const Cell& c)
{
    struct {
        std::string operator()(double v) const { return to_decimal(v); }
        std::string operator()(long long v) const { return std::to_string(v); }
        std::string operator()(bool v) const { return v ? "1" : "0"; }
        std::string operator()(const std::string& s) const
        {
            if (s.find_first_of(",\"\n") == std::string::npos) return s;
            std::string q = "\"";
            for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
            return q + "\"";
        }
    } visit;
    return std::visit(visit, c);
}

inline void write_csv(std::ostream& out, const Table& t)
{
    out << "# kml-csv v1 experiment=" << t.experiment << "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
    out << "\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << cell_text(row[i]);
        out << "\n";
    }
}

} // namespace kml
